"""Inner solvers for the regularized model minimization.

The fine-level systems (J^T J + lam I) s = -(J^T F + corr) are solved by a
truncated conjugate-gradient iteration that applies the operator through
two products with J per step and stops once the model gradient is small
against the squared step norm.  Coarse-level systems are small and dense
and go through a Cholesky factorization.

Only genuine matrix-vector products are charged to the flop counter, at
2*rows*cols apiece; factorizations and matrix-matrix products are not
matrix-vector work and are left out of the tally.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class NumericalError(RuntimeError):
    """Raised when a solve breaks down numerically (caller may raise lam)."""


@dataclass
class FlopCounter:
    """Accumulates flops spent in dense matrix-vector products."""

    matvec_flops: int = 0

    def add_matvec(self, rows, cols):
        self.matvec_flops += 2 * int(rows) * int(cols)


@dataclass
class InnerSolveResult:
    """Outcome of one inner model minimization."""

    step: np.ndarray
    model_gradient_norm: float
    iterations: int
    satisfied: bool
    # residual of the linear system at the returned step, rhs - (B+lam I)s;
    # lets the caller form the predicted model decrease without extra products
    linear_residual: np.ndarray = field(repr=False, default=None)


def predicted_reduction(step, rhs, linear_residual, lam):
    """Decrease of the (corrected) Taylor model along `step`.

    For the model g^T s + 0.5 s^T B s (with any linear correction folded
    into g, and rhs = -g for the inner system with matrix B + lam*I), the
    predicted reduction evaluates to

        0.5 * (s^T rhs + s^T residual + lam * ||s||^2)

    which is strictly positive for a nonzero conjugate-gradient or exact
    step.
    """
    return 0.5 * (step @ rhs + step @ linear_residual + lam * (step @ step))


def cgls_truncated(J, F, lam, corr=None, theta=0.1, max_iter=None, counter=None, grad=None):
    """Approximately solve (J^T J + lam I) s = -(J^T F + corr).

    Plain conjugate gradients on the shifted normal operator, applied via
    one product with J and one with J^T per iteration.  Iterations stop at
    the first step whose true system residual satisfies

        ||(J^T J + lam I) s + J^T F + corr|| <= theta * ||s||^2

    (the stopping bound is re-verified against a freshly recomputed
    residual before the result is flagged satisfied).  `grad` may carry a
    precomputed J^T F whose cost was already charged by the caller.
    """
    if lam <= 0:
        raise ValueError("regularization weight lam must be positive")
    J = np.asarray(J, dtype=float)
    F = np.asarray(F, dtype=float)
    m, n = J.shape
    if counter is None:
        counter = FlopCounter()
    if grad is None:
        if not np.all(np.isfinite(J)) or not np.all(np.isfinite(F)):
            raise NumericalError("non-finite entries in the inner linear system")
        grad = J.T @ F
        counter.add_matvec(m, n)
    rhs = -grad if corr is None else -(grad + corr)
    if not np.all(np.isfinite(rhs)):
        raise NumericalError("non-finite right-hand side in the inner linear system")
    if max_iter is None:
        max_iter = n

    def apply_operator(x):
        y = J.T @ (J @ x) + lam * x
        counter.add_matvec(m, n)
        counter.add_matvec(n, m)
        return y

    s = np.zeros(n)
    if not rhs.any():
        return InnerSolveResult(s, 0.0, 0, True, linear_residual=rhs.copy())

    r = rhs.copy()
    p = r.copy()
    rs = float(r @ r)
    rhs_norm = np.sqrt(rs)
    model_value = 0.0  # 0.5 s^T (B+lam I) s - rhs^T s, decreases monotonically
    for iteration in range(1, max_iter + 1):
        mp = apply_operator(p)
        curvature = float(p @ mp)
        if not np.isfinite(curvature) or curvature <= 0:
            raise NumericalError("conjugate gradient lost positive definiteness")
        alpha = rs / curvature
        s += alpha * p
        r -= alpha * mp
        ss = float(s @ s)
        new_model_value = 0.5 * float(s @ (rhs - r)) - float(rhs @ s)
        # monotone up to rounding of magnitude ~eps * ||s|| * ||rhs||
        assert new_model_value <= model_value + 1e-9 * (1.0 + rhs_norm * np.sqrt(ss))
        model_value = new_model_value
        rs_new = float(r @ r)
        bound = theta * ss
        if rs_new == 0.0 or np.sqrt(rs_new) <= bound:
            true_residual = rhs - apply_operator(s)
            true_norm = float(np.linalg.norm(true_residual))
            if true_norm <= bound:
                return InnerSolveResult(s, true_norm, iteration, True, true_residual)
            if rs_new == 0.0:  # recurrence exhausted, nothing more to gain
                return InnerSolveResult(s, true_norm, iteration, False, true_residual)
        p = r + (rs_new / rs) * p
        rs = rs_new
    true_residual = rhs - apply_operator(s)
    true_norm = float(np.linalg.norm(true_residual))
    satisfied = true_norm <= theta * float(s @ s)
    return InnerSolveResult(s, true_norm, max_iter, satisfied, true_residual)


def direct_solve(B_reg, rhs, counter=None):
    """Solve an SPD system by Cholesky factorization.

    The computed solution is verified against a backward-error style bound
    ||B s - rhs|| <= 1e-10 * (||B||_F * ||s|| + ||rhs||); a factorization
    failure or a violated bound raises NumericalError so the caller can
    grow the regularization weight and retry.  The verification product is
    a safety check, not solver work, and is not charged to the counter
    (the factorization itself performs no matrix-vector products).
    """
    B_reg = np.asarray(B_reg, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    try:
        factor = scipy.linalg.cho_factor(B_reg, check_finite=True)
        s = scipy.linalg.cho_solve(factor, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"dense Cholesky solve failed: {exc}") from exc
    residual = B_reg @ s - rhs
    scale = float(np.linalg.norm(B_reg)) * float(np.linalg.norm(s)) + float(np.linalg.norm(rhs))
    if not np.all(np.isfinite(s)) or float(np.linalg.norm(residual)) > 1e-10 * scale:
        raise NumericalError("dense solve residual exceeds the backward-error bound")
    return s
