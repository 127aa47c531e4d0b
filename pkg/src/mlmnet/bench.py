"""Benchmark harness: problem registry, multi-seed campaigns, reports.

A campaign runs the requested solvers from identical random starting
points over a list of seeds and aggregates iteration counts, solution
errors and the flop ratio (`save`) of the one-level versus the two-level
solver.  All randomness comes from numpy's default PCG64 generator
seeded per run, so campaigns are reproducible bit for bit.
"""

import hashlib
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import pde
from .activations import Activation
from .amg import build_transfer_operators
from .linsolve import FlopCounter
from .lm import LmConfig, lm_solve
from .mlm import MlmConfig, mlm_solve
from .network import NetworkArch

SOLVERS = ("lm", "mlm")


@dataclass
class ProblemEntry:
    """Registry row: how to build a benchmark problem and its defaults."""

    factory: callable
    dim: int
    default_nu: float
    default_r: int
    description: str
    velocity_name: str = None  # set for the Helmholtz velocity variants

    def build(self, nu):
        if self.velocity_name is not None:
            return self.factory(nu=nu, velocity=self.velocity_name)
        return self.factory(nu=nu)


PROBLEMS = {
    "poisson1d": ProblemEntry(pde.poisson_1d, 1, 20, 512, "-u'' = g1, solution cos(nu z)"),
    "poisson2d": ProblemEntry(pde.poisson_2d, 2, 5, 1024, "-Lap u = g1, solution cos(nu (z1+z2))"),
    "helmholtz1d": ProblemEntry(
        pde.helmholtz_1d, 1, 5, 1024, "-u'' - nu^2 u = 0, solution sin(nu z)+cos(nu z)"
    ),
    "helmholtz2d-const": ProblemEntry(
        pde.helmholtz_2d, 2, 1, 512, "2D Helmholtz, constant velocity 40", "constant"
    ),
    "helmholtz2d-two-layers": ProblemEntry(
        pde.helmholtz_2d, 2, 2, 512, "2D Helmholtz, two-layer velocity 20/40", "two-layers"
    ),
    "helmholtz2d-four-layers": ProblemEntry(
        pde.helmholtz_2d, 2, 2, 512, "2D Helmholtz, four-layer velocity 20..80", "four-layers"
    ),
    "helmholtz2d-sine": ProblemEntry(
        pde.helmholtz_2d, 2, 2, 512,
        "2D Helmholtz, velocity 0.1 sin(z1+z2) (extreme zero-order coefficient)", "sine",
    ),
    "sine1d": ProblemEntry(
        pde.sine_nonlinear_1d, 1, 20, 512, "u'' + sin(u) = g1, solution 0.1 cos(nu z)"
    ),
    "exp2d": ProblemEntry(
        pde.exp_nonlinear_2d, 2, 1, 512, "Lap u + e^u = g1, solution log(nu/(z1+z2+10))"
    ),
}


@dataclass
class Campaign:
    """One benchmark configuration: problem, sizes, seeds, solvers."""

    name: str
    problem: str
    nu: float = None
    r: int = None
    activation: str = "sigmoid"
    seeds: tuple = (0,)
    solvers: tuple = ("lm", "mlm")
    overrides: dict = field(default_factory=dict)
    eps_amg: float = 0.9
    penalty: float = None
    test_points_per_axis: int = 100
    fd_resolution: int = 201

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; see list_problems()")
        if not self.seeds:
            raise ValueError("campaign needs at least one seed")
        unknown = set(self.solvers) - set(SOLVERS)
        if unknown:
            raise ValueError(f"unknown solvers {sorted(unknown)}")
        entry = PROBLEMS[self.problem]
        if self.nu is None:
            self.nu = entry.default_nu
        if self.r is None:
            self.r = entry.default_r
        if "mlm" in self.solvers and self.r < 2:
            raise ValueError("the two-level solver needs at least 2 hidden nodes to coarsen")
        unknown = set(self.overrides) - set(MlmConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config overrides {sorted(unknown)}")


@dataclass
class SeedResult:
    """Reports of all solvers started from one seed's initial guess."""

    seed: int
    reports: dict
    rmse: dict
    p0_digest: str
    errors: dict


@dataclass
class ComparisonRow:
    """Aggregate over seeds for one solver, in benchmark-table format."""

    solver: str
    mean_iterations: float
    rmse_seeds: list
    rmse_geomean: float
    save_min: float = None
    save_mean: float = None
    save_max: float = None
    failures: int = 0


def initial_guess(seed, n_params):
    """The canonical starting point for a seed: iid uniform on [-1, 1]."""
    return np.random.default_rng(seed).uniform(-1.0, 1.0, n_params)


def _solver_configs(campaign):
    base = {}
    lm_fields = set(LmConfig.__dataclass_fields__)
    if "epsilon" not in campaign.overrides:
        base["epsilon"] = 1e-4 if PROBLEMS[campaign.problem].dim == 1 else 1e-3
    lm_kwargs = {k: v for k, v in {**base, **campaign.overrides}.items() if k in lm_fields}
    mlm_kwargs = {**base, **campaign.overrides}
    return LmConfig(**lm_kwargs), MlmConfig(**mlm_kwargs)


def build_system(campaign):
    """Residual system for a campaign (problem, grid and architecture)."""
    entry = PROBLEMS[campaign.problem]
    problem = entry.build(campaign.nu)
    if campaign.penalty is not None:
        problem.penalty = campaign.penalty
    arch = NetworkArch(campaign.r, problem.dim, Activation(campaign.activation))
    return pde.ResidualSystem(problem, arch)


def reference_for(campaign, system, cache_dir=None):
    """Error-metric reference: the true solution, or an FD field for Helmholtz."""
    if system.problem.true_solution is not None:
        return None  # rmse() falls back to the true solution
    from . import fdref

    entry = PROBLEMS[campaign.problem]
    if cache_dir is not None:
        return fdref.cached_reference(
            cache_dir, campaign.nu, system.problem.velocity, entry.velocity_name,
            system.problem.rhs_interior, campaign.fd_resolution,
        )
    return fdref.solve_helmholtz_fd(
        campaign.nu, system.problem.velocity, system.problem.rhs_interior,
        campaign.fd_resolution,
    )


def run_seed(campaign, system, seed, lm_cfg, mlm_cfg, reference, trace_dir=None):
    """Run every requested solver from the seed's starting point."""
    p0 = initial_guess(seed, system.n)
    digest = hashlib.sha256(p0.tobytes()).hexdigest()
    reports, rmse, errors = {}, {}, {}
    ops = None
    for solver in campaign.solvers:
        x0 = p0.copy()
        assert hashlib.sha256(x0.tobytes()).hexdigest() == digest
        trace = None
        if trace_dir is not None:
            trace_path = trace_dir / f"trace_{campaign.name}_{solver}_seed{seed}.csv"
            trace = open(trace_path, "w", newline="")
        try:
            if solver == "lm":
                report = lm_solve(system, x0, lm_cfg, FlopCounter(), trace=trace, seed=seed)
            else:
                ops = build_transfer_operators(
                    system.jacobian(p0), system.arch, eps_amg=campaign.eps_amg
                )
                report = mlm_solve(
                    system, x0, mlm_cfg, ops, FlopCounter(), trace=trace, seed=seed
                )
            reports[solver] = report
            rmse[solver] = system.rmse(
                report.final_params, campaign.test_points_per_axis, reference
            )
        except Exception as exc:  # solver failure: recorded, excluded from aggregates
            errors[solver] = f"{type(exc).__name__}: {exc}"
        finally:
            if trace is not None:
                trace.close()
    return SeedResult(seed=seed, reports=reports, rmse=rmse, p0_digest=digest, errors=errors)


def aggregate(campaign, seed_results):
    """Fold per-seed reports into one comparison row per solver."""
    rows = []
    saves = []
    for res in sorted(seed_results, key=lambda r: r.seed):
        if "lm" in res.reports and "mlm" in res.reports:
            saves.append(res.reports["lm"].matvec_flops / res.reports["mlm"].matvec_flops)
    for solver in campaign.solvers:
        ok = [r for r in sorted(seed_results, key=lambda r: r.seed) if solver in r.reports]
        failures = len(seed_results) - len(ok)
        if failures:
            warnings.warn(
                f"campaign {campaign.name!r}: {failures} seed(s) failed for {solver}"
            )
        if not ok:
            rows.append(ComparisonRow(solver, math.nan, [], math.nan, failures=failures))
            continue
        rmses = [r.rmse[solver] for r in ok]
        row = ComparisonRow(
            solver=solver,
            mean_iterations=float(np.mean([r.reports[solver].iterations for r in ok])),
            rmse_seeds=rmses,
            rmse_geomean=float(np.exp(np.mean(np.log(np.maximum(rmses, 1e-300))))),
            failures=failures,
        )
        if solver == "mlm" and saves:
            row.save_min = float(np.min(saves))
            row.save_mean = float(np.mean(saves))
            row.save_max = float(np.max(saves))
        rows.append(row)
    return rows


def run_campaign(campaign, trace_dir=None, cache_dir=None, workers=1):
    """Execute a campaign and return its comparison rows (plus seed detail).

    Seeds may run on a thread pool; results are aggregated in seed order,
    so the report does not depend on scheduling.
    """
    system = build_system(campaign)
    lm_cfg, mlm_cfg = _solver_configs(campaign)
    reference = reference_for(campaign, system, cache_dir)

    def job(seed):
        return run_seed(campaign, system, seed, lm_cfg, mlm_cfg, reference, trace_dir)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            seed_results = list(pool.map(job, campaign.seeds))
    else:
        seed_results = [job(seed) for seed in campaign.seeds]
    return aggregate(campaign, seed_results), seed_results


# -- report emission -----------------------------------------------------------

_CSV_FIELDS = (
    "campaign", "solver", "mean_iterations", "rmse_geomean", "rmse_seeds",
    "save_min", "save_mean", "save_max", "failures",
)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.6g}"
    return str(value)


def emit_report(rows, fmt, path):
    """Write comparison rows as CSV or JSON with stable field order.

    `rows` is a list of (campaign_name, ComparisonRow) pairs.  Floats are
    rendered at 6 significant digits, so repeated runs of a deterministic
    campaign produce byte-identical files.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as stream:
        if fmt == "csv":
            stream.write(",".join(_CSV_FIELDS) + "\n")
            for name, row in rows:
                rec = [
                    name, row.solver, _fmt(row.mean_iterations), _fmt(row.rmse_geomean),
                    ";".join(_fmt(v) for v in row.rmse_seeds),
                    _fmt(row.save_min), _fmt(row.save_mean), _fmt(row.save_max),
                    str(row.failures),
                ]
                stream.write(",".join(rec) + "\n")
        else:
            import json

            payload = [
                {
                    "campaign": name,
                    "solver": row.solver,
                    "mean_iterations": _json_num(row.mean_iterations),
                    "rmse_geomean": _json_num(row.rmse_geomean),
                    "rmse_seeds": [_json_num(v) for v in row.rmse_seeds],
                    "save_min": _json_num(row.save_min),
                    "save_mean": _json_num(row.save_mean),
                    "save_max": _json_num(row.save_max),
                    "failures": row.failures,
                }
                for name, row in rows
            ]
            json.dump(payload, stream, indent=2)
            stream.write("\n")


def _json_num(value):
    if value is None:
        return None
    if isinstance(value, float):
        if math.isnan(value):
            return None
        return float(f"{value:.6g}")
    return value


def parse_report_csv(path):
    """Read back an emitted CSV report as a list of dicts (strings kept)."""
    import csv

    with open(path, newline="") as stream:
        return list(csv.DictReader(stream))


def list_problems():
    """(id, description, default nu, default r) rows of the registry."""
    return [
        (name, entry.description, entry.default_nu, entry.default_r)
        for name, entry in PROBLEMS.items()
    ]
