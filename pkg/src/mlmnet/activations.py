"""Hidden-node activation functions with closed-form derivatives.

Every supported kind exposes the value and its first three derivatives,
all evaluated without overflow for arguments up to around |x| = 700.
Higher derivatives of the bounded kinds are polynomials in the value
itself, so they inherit that stability for free; the logistic and
softplus kinds are branch-guarded explicitly.
"""

import numpy as np

KINDS = ("sigmoid", "tanh", "logistic", "softplus")


def _logistic(x):
    # 1/(1+e^-x) without evaluating exp on the overflowing side
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x):
    # log(1+e^x) = x + log(1+e^-x) for x > 0
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = x[pos] + np.log1p(np.exp(-x[pos]))
    out[~pos] = np.log1p(np.exp(x[~pos]))
    return out


def _eval_sigmoid(x, order):
    # (e^x - 1)/(e^x + 1), i.e. tanh(x/2)
    s = np.tanh(0.5 * x)
    if order == 0:
        return s
    if order == 1:
        return 0.5 * (1.0 - s * s)
    if order == 2:
        return -0.5 * s * (1.0 - s * s)
    return 0.25 * (1.0 - s * s) * (3.0 * s * s - 1.0)


def _eval_tanh(x, order):
    s = np.tanh(x)
    if order == 0:
        return s
    if order == 1:
        return 1.0 - s * s
    if order == 2:
        return -2.0 * s * (1.0 - s * s)
    return -2.0 * (1.0 - s * s) * (1.0 - 3.0 * s * s)


def _eval_logistic(x, order):
    s = _logistic(x)
    if order == 0:
        return s
    ds = s * (1.0 - s)
    if order == 1:
        return ds
    if order == 2:
        return ds * (1.0 - 2.0 * s)
    return ds * (1.0 - 6.0 * s + 6.0 * s * s)


def _eval_softplus(x, order):
    if order == 0:
        return _softplus(x)
    return _eval_logistic(x, order - 1)


_EVAL = {
    "sigmoid": _eval_sigmoid,
    "tanh": _eval_tanh,
    "logistic": _eval_logistic,
    "softplus": _eval_softplus,
}


def activation_eval(kind, order, x):
    """Evaluate the activation `kind` or its derivative of given order.

    `order` must be in 0..3.  `x` may be a scalar or an ndarray; the
    result has the same shape.
    """
    if kind not in _EVAL:
        raise ValueError(f"unknown activation kind {kind!r}, expected one of {KINDS}")
    if order not in (0, 1, 2, 3):
        raise ValueError(f"derivative order must be in 0..3, got {order}")
    arr = np.asarray(x, dtype=float)
    out = _EVAL[kind](np.atleast_1d(arr), order)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


class Activation:
    """A named hidden-node nonlinearity, callable with a derivative order."""

    def __init__(self, kind):
        if kind not in KINDS:
            raise ValueError(f"unknown activation kind {kind!r}, expected one of {KINDS}")
        self.kind = kind

    def __call__(self, x, order=0):
        return activation_eval(self.kind, order, x)

    def __repr__(self):
        return f"Activation({self.kind!r})"

    def __eq__(self, other):
        return isinstance(other, Activation) and other.kind == self.kind
