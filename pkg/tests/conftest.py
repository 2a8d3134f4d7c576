import numpy as np
import pytest

from phantom_burster.model import PAPER_PARAMETERS
from phantom_burster.reductions import FieldTag, VectorFieldSpec


def toy_field(rhs, jac, dim, tag=FieldTag.SURGE_PLANAR):
    """Wrap plain callables (state arrays of shape (dim,) or (dim, M)) as a field spec."""
    return VectorFieldSpec(
        tag=tag,
        dimension=dim,
        params=PAPER_PARAMETERS,
        extras={},
        coefficients={},
        variables=tuple(f"u{k}" for k in range(dim)),
        _rhs=rhs,
        _jac=jac,
    )


@pytest.fixture
def decay_field():
    return toy_field(lambda u: -np.asarray(u), lambda u: -np.ones((1, 1) + np.shape(u)[1:]), 1, FieldTag.SURGE_PLANAR)


@pytest.fixture
def rotation_field():
    def rhs(u):
        return np.array([u[1], -u[0]])

    def jac(u):
        J = np.array([[0.0, 1.0], [-1.0, 0.0]])
        return J if np.ndim(u) == 1 else np.repeat(J[:, :, None], np.shape(u)[1], axis=2)

    return toy_field(rhs, jac, 2)


@pytest.fixture
def limit_cycle_field():
    """x' = -y + x(1-r^2), y' = x + y(1-r^2): unit circle of period 2 pi."""

    def rhs(u):
        x, y = u[0], u[1]
        k = 1.0 - x * x - y * y
        return np.array([-y + x * k, x + y * k])

    def jac(u):
        x, y = u[0], u[1]
        k = 1.0 - x * x - y * y
        return np.array([[k - 2 * x * x, -1.0 - 2 * x * y], [1.0 - 2 * x * y, k - 2 * y * y]])

    return toy_field(rhs, jac, 2)
