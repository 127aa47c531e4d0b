import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_difference(f, x, h):
    """First derivative of a scalar->scalar map by central differences."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def fd_gradient(f, x, h=1e-6):
    """Gradient of a scalar map on R^n by central differences."""
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.size)
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = h
        grad[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def fd_jacobian(f, x, h=1e-6):
    """Jacobian of a vector map on R^n by central differences, column-wise."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = h
        cols.append((f(x + e) - f(x - e)) / (2.0 * h))
    return np.column_stack(cols)


def rel_err(approx, exact):
    """Max elementwise deviation, scaled by the magnitude of `exact`."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return float(np.max(np.abs(approx - exact)) / max(1.0, np.max(np.abs(exact))))
