"""One-level Levenberg-Marquardt driver.

Works on any least-squares system exposing residual(x) and jacobian(x);
the loss is 0.5*||residual||^2.  Each iteration builds the regularized
Gauss-Newton model, obtains a step from the truncated CG solver, accepts
or rejects it on the actual-over-predicted reduction ratio and updates
the regularization weight on the usual three-branch schedule.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .linsolve import FlopCounter, NumericalError, cgls_truncated, predicted_reduction

# consecutive inner-solver breakdowns tolerated before giving up
_MAX_INNER_FAILURES = 50


@dataclass
class LmConfig:
    """Parameters of the acceptance test and regularization schedule."""

    eta1: float = 0.1
    eta2: float = 0.75
    gamma1: float = 0.85
    gamma2: float = 0.5
    gamma3: float = 1.5
    lambda0: float = 0.05
    lambda_min: float = 1e-6
    epsilon: float = 1e-4
    theta: float = 0.1
    max_outer_iter: int = 2000
    cg_max_iter: int = None  # default: system dimension

    def __post_init__(self):
        if not (0 < self.eta1 <= self.eta2 < 1):
            raise ValueError("need 0 < eta1 <= eta2 < 1")
        if not (0 < self.gamma2 <= self.gamma1 < 1 < self.gamma3):
            raise ValueError("need 0 < gamma2 <= gamma1 < 1 < gamma3")
        if self.lambda_min <= 0 or self.lambda0 <= self.lambda_min:
            raise ValueError("need lambda0 > lambda_min > 0")
        if self.epsilon <= 0 or self.theta <= 0:
            raise ValueError("epsilon and theta must be positive")
        if self.max_outer_iter < 0:
            raise ValueError("max_outer_iter must be nonnegative")


@dataclass
class SolveReport:
    """Outcome of one optimization run."""

    iterations: int
    accepted_steps: int
    rejected_steps: int
    final_gradient_norm: float
    loss_history: list
    matvec_flops: int
    converged: bool
    final_params: np.ndarray
    seed: int = None
    coarse_steps: int = 0
    coherence_residuals: list = field(default_factory=list)


class TraceWriter:
    """Per-iteration CSV trace of a solver run."""

    def __init__(self, stream, with_level=False):
        self._writer = csv.writer(stream, lineterminator="\n")
        self.with_level = with_level
        header = ["iteration", "loss", "grad_norm", "lambda", "rho", "accepted", "cum_matvec_flops"]
        if with_level:
            header.insert(1, "level")
        self._writer.writerow(header)

    def row(self, iteration, loss, grad_norm, lam, rho, accepted, flops, level=None):
        rec = [
            iteration,
            f"{loss:.12g}",
            f"{grad_norm:.12g}",
            f"{lam:.12g}",
            "" if rho is None else f"{rho:.12g}",
            int(accepted),
            flops,
        ]
        if self.with_level:
            rec.insert(1, level)
        self._writer.writerow(rec)


def update_lambda(lam, rho, cfg):
    """Three-branch regularization update driven by the acceptance ratio."""
    if rho is not None and rho >= cfg.eta1:
        gamma = cfg.gamma2 if rho >= cfg.eta2 else cfg.gamma1
        return max(cfg.lambda_min, gamma * lam)
    return cfg.gamma3 * lam


def lm_solve(system, x0, cfg=None, counter=None, trace=None, seed=None):
    """Minimize 0.5*||F(x)||^2 from x0; stops on the gradient norm.

    `trace`, when given, is a text stream receiving one CSV row per
    iteration.  Returns a SolveReport; `seed` is carried through for
    bookkeeping only.
    """
    cfg = cfg if cfg is not None else LmConfig()
    counter = counter if counter is not None else FlopCounter()
    writer = TraceWriter(trace) if trace is not None else None

    x = np.array(x0, dtype=float)
    F = system.residual(x)
    f = 0.5 * float(F @ F)
    if not np.isfinite(f):
        raise ValueError("loss is not finite at the starting point")
    m, n = len(F), len(x)
    cg_cap = cfg.cg_max_iter if cfg.cg_max_iter is not None else n

    lam = cfg.lambda0
    history = [f]
    accepted = rejected = 0
    inner_failures = 0
    converged = False
    grad_norm = np.inf
    stale = True  # J and g need a refresh (start, or after an accepted step)

    iteration = 0
    while iteration < cfg.max_outer_iter:
        if stale:
            J = system.jacobian(x)
            g = J.T @ F
            counter.add_matvec(m, n)
            grad_norm = float(np.linalg.norm(g))
            stale = False
        if grad_norm <= cfg.epsilon:
            converged = True
            break

        iteration += 1
        try:
            inner = cgls_truncated(
                J, F, lam, theta=cfg.theta, max_iter=cg_cap, counter=counter, grad=g
            )
        except NumericalError:
            inner_failures += 1
            if inner_failures >= _MAX_INNER_FAILURES:
                raise
            lam = cfg.gamma3 * lam
            rejected += 1
            history.append(f)
            if writer:
                writer.row(iteration, f, grad_norm, lam, None, False, counter.matvec_flops)
            continue
        inner_failures = 0

        s = inner.step
        pred = predicted_reduction(s, -g, inner.linear_residual, lam)
        rho = None
        if pred > 0 and s.any():
            F_trial = system.residual(x + s)
            f_trial = 0.5 * float(F_trial @ F_trial)
            if np.isfinite(f_trial):
                rho = (f - f_trial) / pred
        took_step = rho is not None and rho >= cfg.eta1
        if took_step:
            x = x + s
            F, f = F_trial, f_trial
            accepted += 1
            stale = True
        else:
            rejected += 1
        lam = update_lambda(lam, rho, cfg)
        history.append(f)
        if writer:
            writer.row(iteration, f, grad_norm, lam, rho, took_step, counter.matvec_flops)

    if not converged and iteration >= cfg.max_outer_iter:
        if stale:  # the cap landed right after an accepted step
            g = system.jacobian(x).T @ F
            counter.add_matvec(m, n)
            grad_norm = float(np.linalg.norm(g))
        converged = grad_norm <= cfg.epsilon

    return SolveReport(
        iterations=iteration,
        accepted_steps=accepted,
        rejected_steps=rejected,
        final_gradient_norm=grad_norm,
        loss_history=history,
        matvec_flops=counter.matvec_flops,
        converged=converged,
        final_params=x,
        seed=seed,
    )
