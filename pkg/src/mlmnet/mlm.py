"""Two-level Levenberg-Marquardt driver.

Alternates plain fine-level iterations with coarse corrections.  The
coarse objective is the same loss over the sub-network spanned by the
coarse hidden nodes, shifted by a linear term so its gradient at the
restricted iterate equals the restricted fine gradient; a bounded run of
damped Gauss-Newton iterations (dense direct solves) minimizes it, and
the resulting coarse step is prolongated back and judged by the usual
actual-over-predicted ratio on the fine loss.
"""

from dataclasses import dataclass

import numpy as np

from .amg import apply_blockwise
from .linsolve import FlopCounter, NumericalError, cgls_truncated, direct_solve, predicted_reduction
from .lm import LmConfig, SolveReport, TraceWriter, update_lambda, _MAX_INNER_FAILURES
from .network import NetworkArch


@dataclass
class MlmConfig(LmConfig):
    """LmConfig plus the coarse-level controls.

    kappa_h and epsilon_h gate the descent to the coarse level (relative
    and absolute size of the restricted gradient); the coarse run itself
    stops at the fine gradient tolerance or after max_coarse_iter
    iterations.  Only the alternating V-style cycle is supported.
    """

    kappa_h: float = 0.1
    epsilon_h: float = None  # default: the fine gradient tolerance
    max_coarse_iter: int = 10
    cycle: str = "alternate_v"
    rebuild_operators: bool = False  # rebuild transfer operators every iteration

    def __post_init__(self):
        super().__post_init__()
        if not (0 < self.kappa_h < 1):
            raise ValueError("kappa_h must lie in (0, 1)")
        if self.epsilon_h is None:
            self.epsilon_h = self.epsilon
        if self.epsilon_h <= 0:
            raise ValueError("epsilon_h must be positive")
        if self.max_coarse_iter < 1:
            raise ValueError("max_coarse_iter must be at least 1")
        if self.cycle != "alternate_v":
            raise ValueError(f"unsupported cycle {self.cycle!r}")


@dataclass
class CoarseModel:
    """Corrected coarse objective anchored at the restricted iterate.

    The model value at a coarse point y is

        0.5*||F_coarse(y)||^2 + correction @ (y - x0)

    whose gradient at x0 equals the restricted fine gradient by
    construction (first-order coherence).
    """

    system: object
    x0: np.ndarray
    correction: np.ndarray
    f0: float
    coherence_residual: float
    _residual0: np.ndarray = None
    _jacobian0: np.ndarray = None
    _grad0: np.ndarray = None


def coarsen_system(system, ops):
    """Coarse counterpart of a least-squares system under the given operators."""
    if hasattr(system, "coarsen"):
        return system.coarsen(ops)
    # network residual systems: same problem and training set, sub-network width
    from .pde import ResidualSystem

    if isinstance(system, ResidualSystem):
        arch = system.arch
        coarse_arch = NetworkArch(ops.r_coarse, arch.dim, arch.activation)
        return ResidualSystem(system.problem, coarse_arch, system.training)
    raise TypeError(f"cannot coarsen system of type {type(system).__name__}")


def go_down(grad_fine, ops, kappa_h, epsilon_h):
    """Is the restricted gradient large enough to justify a coarse step?"""
    restricted = apply_blockwise(ops, grad_fine, "restrict")
    rnorm = float(np.linalg.norm(restricted))
    return rnorm >= kappa_h * float(np.linalg.norm(grad_fine)) and rnorm > epsilon_h


def effective_kappa(cfg, ops):
    """Descent threshold calibrated to the restriction operator.

    No restricted gradient can exceed ||R|| times the fine gradient, so a
    meaningful relative threshold must stay below the norm of R (the
    infinity-norm scaling of the operators makes that norm well below one
    on dense coupling matrices).  The configured kappa_h in (0,1) is
    therefore read as a fraction of the achievable ratio.
    """
    spectral = float(np.linalg.norm(ops.restrict, 2))
    return cfg.kappa_h * min(1.0, spectral)


def build_coarse_model(system, x, ops, grad_fine=None, restricted_grad=None, counter=None):
    """Restrict the iterate and attach the first-order coherence correction."""
    x = np.asarray(x, dtype=float)
    if counter is None:
        counter = FlopCounter()
    if grad_fine is None:
        F = system.residual(x)
        J = system.jacobian(x)
        grad_fine = J.T @ F
        counter.add_matvec(*J.shape)
    if restricted_grad is None:
        restricted_grad = apply_blockwise(ops, grad_fine, "restrict", counter)
    x0 = apply_blockwise(ops, x, "restrict", counter)
    coarse = coarsen_system(system, ops)
    F0 = coarse.residual(x0)
    J0 = coarse.jacobian(x0)
    g0 = J0.T @ F0
    counter.add_matvec(*J0.shape)
    correction = restricted_grad - g0
    coherence = float(np.linalg.norm((g0 + correction) - restricted_grad))
    assert coherence <= 1e-10 * (1.0 + float(np.linalg.norm(grad_fine)))
    return CoarseModel(
        system=coarse,
        x0=x0,
        correction=correction,
        f0=0.5 * float(F0 @ F0),
        coherence_residual=coherence,
        _residual0=F0,
        _jacobian0=J0,
        _grad0=g0,
    )


def coarse_cycle(model, lam, cfg, counter=None):
    """Bounded damped Gauss-Newton run on the corrected coarse objective.

    Returns (step, predicted_reduction, accepted_count) where the step is
    measured from the restricted iterate and the prediction is the model
    decrease achieved by the run; a zero step or zero prediction marks a
    failed coarse attempt.
    """
    if counter is None:
        counter = FlopCounter()
    system, corr = model.system, model.correction
    y = model.x0.copy()
    F, J, g = model._residual0, model._jacobian0, model._grad0
    model_value = model.f0
    accepted = 0
    stale = False
    for _ in range(cfg.max_coarse_iter):
        if stale:
            F = system.residual(y)
            J = system.jacobian(y)
            g = J.T @ F
            counter.add_matvec(*J.shape)
            stale = False
        grad_model = g + corr
        if np.linalg.norm(grad_model) <= cfg.epsilon:
            break
        B = J.T @ J
        B[np.diag_indices_from(B)] += lam
        try:
            s = direct_solve(B, -grad_model, counter)
        except NumericalError:
            lam = cfg.gamma3 * lam
            continue
        Js = J @ s
        counter.add_matvec(*J.shape)
        pred = -(float(grad_model @ s) + 0.5 * float(Js @ Js))
        rho = None
        if pred > 0 and s.any():
            F_trial = system.residual(y + s)
            trial_value = 0.5 * float(F_trial @ F_trial) + float(corr @ (y + s - model.x0))
            if np.isfinite(trial_value):
                rho = (model_value - trial_value) / pred
        if rho is not None and rho >= cfg.eta1:
            y = y + s
            model_value = trial_value
            accepted += 1
            stale = True
        lam = update_lambda(lam, rho, cfg)
    return y - model.x0, model.f0 - model_value, accepted


def mlm_solve(system, x0, cfg=None, ops=None, counter=None, trace=None, seed=None):
    """Two-level minimization of 0.5*||F(x)||^2 from x0.

    `ops` are the transfer operators built once beforehand (from the
    Gauss-Newton matrix at the starting point).  The first iteration works
    at the fine level; afterwards a coarse correction is attempted
    whenever the previous iteration was fine and the restricted gradient
    passes the descent test.
    """
    if ops is None:
        raise ValueError("mlm_solve requires transfer operators")
    cfg = cfg if cfg is not None else MlmConfig()
    counter = counter if counter is not None else FlopCounter()
    writer = TraceWriter(trace, with_level=True) if trace is not None else None

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
    coarse_attempts = 0
    coherence_log = []
    inner_failures = 0
    converged = False
    grad_norm = np.inf
    prev_step_fine = False
    stale = True
    kappa = effective_kappa(cfg, ops)

    iteration = 0
    while iteration < cfg.max_outer_iter:
        if stale:
            J = system.jacobian(x)
            g = J.T @ F
            counter.add_matvec(m, n)
            grad_norm = float(np.linalg.norm(g))
            stale = False
            if cfg.rebuild_operators and accepted:
                from .amg import build_transfer_operators

                if not hasattr(system, "arch"):
                    raise ValueError("operator rebuild needs a network residual system")
                ops = build_transfer_operators(J, system.arch)
                kappa = effective_kappa(cfg, ops)
        if grad_norm <= cfg.epsilon:
            converged = True
            break

        iteration += 1
        use_coarse = False
        if prev_step_fine:
            restricted = apply_blockwise(ops, g, "restrict", counter)
            rnorm = float(np.linalg.norm(restricted))
            use_coarse = rnorm >= kappa * grad_norm and rnorm > cfg.epsilon_h

        if use_coarse:
            prev_step_fine = False
            coarse_attempts += 1
            model = build_coarse_model(
                system, x, ops, grad_fine=g, restricted_grad=restricted, counter=counter
            )
            coherence_log.append((model.coherence_residual, grad_norm))
            step_coarse, pred, n_accepted = coarse_cycle(model, lam, cfg, counter)
            rho = None
            if n_accepted > 0 and pred > 0 and step_coarse.any():
                s = apply_blockwise(ops, step_coarse, "prolong", counter)
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
                writer.row(
                    iteration, f, grad_norm, lam, rho, took_step, counter.matvec_flops,
                    level="coarse",
                )
            continue

        # fine Taylor step
        prev_step_fine = True
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
                writer.row(iteration, f, grad_norm, lam, None, False, counter.matvec_flops,
                           level="fine")
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
            writer.row(iteration, f, grad_norm, lam, rho, took_step, counter.matvec_flops,
                       level="fine")

    if not converged and iteration >= cfg.max_outer_iter:
        if stale:  # the cap landed right after an accepted step
            g = system.jacobian(x).T @ F
            counter.add_matvec(m, n)
            grad_norm = float(np.linalg.norm(g))
        converged = grad_norm <= cfg.epsilon

    report = SolveReport(
        iterations=iteration,
        accepted_steps=accepted,
        rejected_steps=rejected,
        final_gradient_norm=grad_norm,
        loss_history=history,
        matvec_flops=counter.matvec_flops,
        converged=converged,
        final_params=x,
        seed=seed,
        coarse_steps=coarse_attempts,
    )
    report.coherence_residuals = coherence_log
    return report
