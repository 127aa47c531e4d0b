"""One-hidden-layer feedforward network with analytic derivatives.

The network maps a point z in R^dim to

    u(z) = sum_i out_weights[i] * act(<in_weights[:, i], z> + hidden_bias[i]) + out_bias

and exposes closed-form derivatives with respect to both the input point
(gradient, Laplacian) and the stacked parameter vector.  The flat
parameter layout is

    [out_weights | in_weights row 0 | ... | in_weights row dim-1 | hidden_bias | out_bias]

i.e. input weights are grouped by input node, matching the block
structure the algebraic coarsening relies on.
"""

from dataclasses import dataclass

import numpy as np

from .activations import Activation


@dataclass(frozen=True)
class NetworkArch:
    """Shape of the network: hidden width, input dimension, nonlinearity."""

    n_hidden: int
    dim: int
    activation: Activation

    def __post_init__(self):
        if self.n_hidden < 1:
            raise ValueError("n_hidden must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def n_params(self):
        return (self.dim + 2) * self.n_hidden + 1


@dataclass
class NetworkParams:
    """Weights and biases of one network instance.

    out_weights and hidden_bias have length n_hidden; in_weights has shape
    (dim, n_hidden) with row j holding the weights on the edges leaving
    input node j; out_bias is a scalar.
    """

    out_weights: np.ndarray
    in_weights: np.ndarray
    hidden_bias: np.ndarray
    out_bias: float

    def __post_init__(self):
        self.out_weights = np.asarray(self.out_weights, dtype=float)
        self.in_weights = np.atleast_2d(np.asarray(self.in_weights, dtype=float))
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=float)
        self.out_bias = float(self.out_bias)
        r = self.out_weights.shape[0]
        if self.out_weights.ndim != 1 or self.hidden_bias.shape != (r,):
            raise ValueError("out_weights and hidden_bias must be 1-d of equal length")
        if self.in_weights.ndim != 2 or self.in_weights.shape[1] != r:
            raise ValueError("in_weights must have shape (dim, n_hidden)")

    @property
    def n_hidden(self):
        return self.out_weights.shape[0]

    @property
    def dim(self):
        return self.in_weights.shape[0]

    def to_vector(self):
        return np.concatenate(
            [self.out_weights, self.in_weights.ravel(), self.hidden_bias, [self.out_bias]]
        )

    @classmethod
    def from_vector(cls, vec, n_hidden, dim):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != ((dim + 2) * n_hidden + 1,):
            raise ValueError(
                f"parameter vector has length {vec.size}, expected {(dim + 2) * n_hidden + 1}"
            )
        r = n_hidden
        return cls(
            out_weights=vec[:r].copy(),
            in_weights=vec[r : (dim + 1) * r].reshape(dim, r).copy(),
            hidden_bias=vec[(dim + 1) * r : (dim + 2) * r].copy(),
            out_bias=float(vec[-1]),
        )


def _check_match(arch, params):
    if params.n_hidden != arch.n_hidden or params.dim != arch.dim:
        raise ValueError(
            f"parameters of shape (n_hidden={params.n_hidden}, dim={params.dim}) do not "
            f"match architecture (n_hidden={arch.n_hidden}, dim={arch.dim})"
        )


def _as_points(arch, z):
    pts = np.asarray(z, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[1] != arch.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {arch.dim}")
    return pts


# Batch evaluation over a (t, dim) block of points.  These carry the actual
# arithmetic; the pointwise operations below are thin wrappers.

def eval_batch(arch, params, points):
    """Network output at each row of `points`, shape (t,)."""
    _check_match(arch, params)
    pre = points @ params.in_weights + params.hidden_bias
    return arch.activation(pre, 0) @ params.out_weights + params.out_bias


def grad_z_batch(arch, params, points):
    """Spatial gradient at each row of `points`, shape (t, dim)."""
    _check_match(arch, params)
    pre = points @ params.in_weights + params.hidden_bias
    vs1 = arch.activation(pre, 1) * params.out_weights
    return vs1 @ params.in_weights.T


def laplacian_batch(arch, params, points):
    """Spatial Laplacian at each row of `points`, shape (t,)."""
    _check_match(arch, params)
    pre = points @ params.in_weights + params.hidden_bias
    wsq = np.sum(params.in_weights**2, axis=0)
    return arch.activation(pre, 2) @ (params.out_weights * wsq)


def value_param_jacobian_batch(arch, params, points):
    """d(output)/d(params) at each row of `points`, shape (t, n_params)."""
    _check_match(arch, params)
    t = points.shape[0]
    pre = points @ params.in_weights + params.hidden_bias
    s0 = arch.activation(pre, 0)
    s1 = arch.activation(pre, 1)
    jac = np.empty((t, arch.n_params))
    r = arch.n_hidden
    jac[:, :r] = s0
    vs1 = s1 * params.out_weights
    for j in range(arch.dim):
        jac[:, (1 + j) * r : (2 + j) * r] = vs1 * points[:, j : j + 1]
    jac[:, (arch.dim + 1) * r : (arch.dim + 2) * r] = vs1
    jac[:, -1] = 1.0
    return jac


def laplacian_param_jacobian_batch(arch, params, points):
    """d(Laplacian)/d(params) at each row of `points`, shape (t, n_params)."""
    _check_match(arch, params)
    t = points.shape[0]
    pre = points @ params.in_weights + params.hidden_bias
    s2 = arch.activation(pre, 2)
    s3 = arch.activation(pre, 3)
    wsq = np.sum(params.in_weights**2, axis=0)
    jac = np.empty((t, arch.n_params))
    r = arch.n_hidden
    jac[:, :r] = s2 * wsq
    vs2 = s2 * params.out_weights
    vs3w = s3 * (params.out_weights * wsq)
    for j in range(arch.dim):
        wj = params.in_weights[j]
        jac[:, (1 + j) * r : (2 + j) * r] = 2.0 * wj * vs2 + vs3w * points[:, j : j + 1]
    jac[:, (arch.dim + 1) * r : (arch.dim + 2) * r] = vs3w
    jac[:, -1] = 0.0
    return jac


# Pointwise interface.

def net_eval(arch, params, z):
    """Network output at a single point."""
    return float(eval_batch(arch, params, _as_points(arch, z))[0])


def net_grad_z(arch, params, z):
    """Gradient of the output with respect to the input point, shape (dim,)."""
    return grad_z_batch(arch, params, _as_points(arch, z))[0]


def net_laplacian_z(arch, params, z):
    """Laplacian of the output with respect to the input point."""
    return float(laplacian_batch(arch, params, _as_points(arch, z))[0])


def net_param_jacobian(arch, params, z, quantity="value"):
    """Gradient with respect to the parameters of the output or its Laplacian.

    `quantity` selects the scalar being differentiated: "value" for the
    network output, "laplacian" for its spatial Laplacian.  Returns a
    vector in the flat parameter layout, length (dim+2)*n_hidden + 1.
    """
    pts = _as_points(arch, z)
    if quantity == "value":
        return value_param_jacobian_batch(arch, params, pts)[0]
    if quantity == "laplacian":
        return laplacian_param_jacobian_batch(arch, params, pts)[0]
    raise ValueError(f"unknown quantity {quantity!r}, expected 'value' or 'laplacian'")
