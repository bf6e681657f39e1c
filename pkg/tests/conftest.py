import numpy as np
import pytest


def tanh_sinh_01(h=0.05):
    """Double-exponential quadrature nodes/weights on (0, 1).

    Independent oracle rule for integrals of copula densities, which can
    have integrable corner singularities that defeat plain Gauss-Legendre.
    """
    from scipy.special import expit

    kmax = int(4.0 / h)
    t = h * np.arange(-kmax, kmax + 1)
    # (1 + tanh(z)) / 2 == sigmoid(2z); the sigmoid form keeps full float
    # precision for nodes approaching 0, which matters when the integrand
    # has an endpoint singularity.
    nodes = expit(np.pi * np.sinh(t))
    w = h * 0.5 * np.pi * np.cosh(t) / np.cosh(0.5 * np.pi * np.sinh(t)) ** 2
    keep = (nodes > 0.0) & (nodes < 1.0)
    return nodes[keep], 0.5 * w[keep]


@pytest.fixture(scope="session")
def ts_rule():
    return tanh_sinh_01()
