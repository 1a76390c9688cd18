"""Experiment orchestration: seeded generation, checks, CSV, manifest.

Each experiment kind maps to one function that generates its scenario batch
from (config.seed, index), computes per-scenario records, writes CSV, and
returns check results.  Independent scenarios may be sharded across worker
processes (LAB_WORKERS); aggregation order is fixed, so outputs are
byte-identical for a given config regardless of parallelism.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import chain as chain_mod
from . import kernels, rlvr, scenarios, spectral
from ._tol import BOUND_SLACK, FINITE_DIFF, ITERATIVE, STRUCTURAL
from .config import ExperimentConfig, EXPERIMENT_KINDS, config_digest
from .csvio import emit_csv
from .errors import DegenerateGap
from .probcore import Distribution

VERIFY_DB_COUNT = 50
HITTING_COUNT = 20
HITTING_MC_COUNT = 3
HITTING_MC_REPLICAS = 20_000
HITTING_MC_Z_MAX = 4.0
SPECTRAL_COUNT = 25
POINCARE_TIGHT_TOL = 1e-6
TIGHTNESS_GAP_MIN = 1e-7
IDENTITY_FAMILY_COUNT = 20
FLOW_FAMILY_COUNT = 10
FLOW_T_GRID = (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0)
FLOW_LIMIT_TV_TOL = 1e-10
TRACE_FAMILY_COUNT = 10
BERNOULLI_IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    """One verified property: its worst residual and whether it passed."""

    name: str
    passed: bool
    worst_residual: float
    detail: str = ""


@dataclass
class RunManifest:
    """Everything needed to audit a run: config digest, backend, checks."""

    config_digest: str
    artifact_version: str
    kernel_backend: str
    experiments: list[str]
    checks: list[CheckResult] = field(default_factory=list)
    calibration: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        payload = {
            "config_digest": self.config_digest,
            "artifact_version": self.artifact_version,
            "kernel_backend": self.kernel_backend,
            "experiments": self.experiments,
            "checks": [asdict(c) for c in self.checks],
            "calibration": self.calibration,
            "ok": self.ok,
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def _worker_count() -> int:
    env = os.environ.get("LAB_WORKERS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def _map_ordered(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# --------------------------------------------------------------------------
# per-scenario workers (module level so they pickle)
# --------------------------------------------------------------------------


def _verify_db_row(args):
    seed, index, n_states, beta = args
    sc = scenarios.random_scenario(seed, index, n_states=n_states, beta=beta)
    pre = chain_mod.build_pretrained_kernel(sc)
    base_residual = chain_mod.pretrained_log_ratio_residual(pre, sc.p_data)
    ch = chain_mod.tilt_kernel(pre, sc.h, sc.beta)
    recovered = chain_mod.recover_potential(ch.kernel)
    diff = recovered - ch.potential
    roundtrip = float(np.max(np.abs(diff - diff[0])))
    return (
        index,
        n_states,
        beta,
        base_residual,
        chain_mod.detailed_balance_residual(ch),
        chain_mod.log_ratio_residual(ch),
        roundtrip,
        chain_mod.stationarity_residual(ch),
    )


def _hitting_row(args):
    seed, index, n_states, threshold_override, with_mc = args
    ch, threshold = scenarios.birth_death_chain(seed, index, n_states=n_states)
    if threshold_override is not None:
        threshold = threshold_override
    analysis = chain_mod.hitting_bound_check(ch, threshold)
    bound_excess = float(np.max(analysis.expected_times - analysis.bound_values))
    condition = analysis.condition_holds
    gamma = analysis.gamma
    times = analysis.expected_times
    targets = analysis.target_set
    mc_row = None
    if with_mc:
        start = int(np.argmax(ch.potential))
        mean, stderr = chain_mod.mc_hitting_estimate(
            ch, targets, start, HITTING_MC_REPLICAS, seed=seed + index
        )
        exact = float(times[start])
        z = 0.0 if stderr == 0.0 else (mean - exact) / stderr
        mc_row = (index, start, exact, mean, stderr, z)
    row = (
        index,
        n_states,
        threshold,
        gamma,
        condition,
        float(np.max(times)),
        bound_excess,
    )
    return row, mc_row


def _spectral_row(args):
    seed, index, n_states, beta, steps = args
    sc = scenarios.random_scenario(seed, index, n_states=n_states, beta=beta)
    ch = chain_mod.tilt_kernel(chain_mod.build_pretrained_kernel(sc), sc.h, sc.beta)
    p0 = Distribution.point_mass(0, n_states)
    report = spectral.spectral_report(ch, p0)
    margins = spectral.convergence_bound_check(ch, p0, steps)
    # Gap-normalized quantities lose meaning as the gap degenerates: the
    # division amplifies eigensolver roundoff by 1/lambda2.  Such scenarios
    # are recorded as NaN and excluded from the gap-based checks.
    try:
        poincare = spectral.poincare_check(ch)
    except DegenerateGap:
        poincare = float("nan")
    if report.lambda2 >= TIGHTNESS_GAP_MIN:
        tight = spectral.poincare_check(
            ch, potential=spectral.second_eigenfunction(ch)
        )
    else:
        tight = float("nan")
    return (
        index,
        float(report.eigenvalues_mu[1]),
        report.rho,
        report.lambda2,
        report.variance_V,
        report.dirichlet_V,
        report.chi0,
        float(np.min(margins)),
        poincare,
        tight,
    )


def _identity_rows(args):
    seed, index, n_prompts, n_responses, beta, grid = args
    fam = scenarios.random_family(
        seed, index, n_prompts=n_prompts, n_responses=n_responses, beta=beta
    )
    rows = []
    for lam in grid:
        rows.append(
            (
                index,
                lam,
                rlvr.bernoulli_identity_check(fam, lam),
                rlvr.accuracy_derivative_check(fam, lam),
                rlvr.kl_derivative_check(fam, lam),
                rlvr.jensen_aggregate_check(fam, lam),
            )
        )
    return rows


def _flow_rows(args):
    seed, index, n_prompts, n_responses, beta = args
    fam = scenarios.random_family(
        seed, index, n_prompts=n_prompts, n_responses=n_responses, beta=beta
    )
    rows = []
    for t in FLOW_T_GRID:
        state, pt = rlvr.flow_solution(fam, t)
        direct = rlvr.path_point(fam, state.schedule_lambda)
        gap = max(
            float(np.max(np.abs(pt.tilted[i].probs - direct.tilted[i].probs)))
            for i in range(len(fam.prompts))
        )
        rows.append((index, t, rlvr.flow_ode_residual(fam, t), gap))
    t_limit = 50.0 / beta
    _, pt_limit = rlvr.flow_solution(fam, t_limit)
    star = rlvr.target_point(fam)
    tv = max(
        0.5 * float(np.sum(np.abs(pt_limit.tilted[i].probs - star.tilted[i].probs)))
        for i in range(len(fam.prompts))
    )
    return rows, (index, t_limit, tv)


def _trace_rows(args):
    seed, index, n_prompts, n_responses, beta, steps = args
    fam = scenarios.near_target_family(
        seed, index, n_prompts=n_prompts, n_responses=n_responses, beta=beta
    )
    fit = rlvr.entropy_accuracy_trace(fam, steps)
    rows = []
    for j in range(fit.ns.size):
        rows.append(
            (
                index,
                int(fit.ns[j]),
                float(fit.lambdas[j]),
                float(fit.mean_accuracy[j]),
                float(fit.mean_entropy[j]),
                float(fit.mean_kl_to_target[j]),
                rlvr.jensen_aggregate_check(fam, float(fit.lambdas[j])),
            )
        )
    summary = (
        index,
        fit.mean_target_accuracy,
        fit.applicable,
        fit.reason,
        fit.association,
        fit.fitted_a,
        fit.fitted_b,
        fit.fit_residual,
    )
    return rows, summary


# --------------------------------------------------------------------------
# experiment drivers
# --------------------------------------------------------------------------


def _run_verify_db(cfg: ExperimentConfig, out_dir: str, workers: int) -> list[CheckResult]:
    args = [(cfg.seed, i, cfg.n_states, cfg.beta) for i in range(VERIFY_DB_COUNT)]
    rows = _map_ordered(_verify_db_row, args, workers)
    emit_csv(
        os.path.join(out_dir, "verify_db.csv"),
        ["scenario", "n_states", "beta", "base_reversibility", "detailed_balance",
         "log_ratio", "potential_roundtrip", "stationarity"],
        rows,
    )
    worst = {name: max(r[col] for r in rows) for col, name in
             ((3, "base"), (4, "db"), (5, "lr"), (6, "rt"), (7, "st"))}
    return [
        _check("verify-db/base-reversibility", worst["base"], STRUCTURAL),
        _check("verify-db/detailed-balance", worst["db"], STRUCTURAL),
        _check("verify-db/log-ratio-form", worst["lr"], ITERATIVE),
        _check("verify-db/potential-round-trip", worst["rt"], BOUND_SLACK),
        _check("verify-db/stationarity", worst["st"], STRUCTURAL),
    ]


def _run_evolve(cfg: ExperimentConfig, out_dir: str, workers: int) -> list[CheckResult]:
    sc = scenarios.random_scenario(cfg.seed, 0, n_states=cfg.n_states, beta=cfg.beta)
    ch = chain_mod.tilt_kernel(chain_mod.build_pretrained_kernel(sc), sc.h, sc.beta)
    p0 = Distribution.point_mass(int(np.argmax(ch.potential)), cfg.n_states)
    traj = chain_mod.evolve(ch, p0, cfg.steps)
    emit_csv(
        os.path.join(out_dir, "evolve.csv"),
        ["t", "kl", "expected_potential"],
        [(int(t), float(traj.kl_trace[t]), float(traj.expected_potential_trace[t]))
         for t in range(cfg.steps + 1)],
    )
    worst_rise = float(np.max(np.diff(traj.kl_trace)))
    return [_check("evolve/kl-monotone", worst_rise, STRUCTURAL)]


def _run_hitting(cfg: ExperimentConfig, out_dir: str, workers: int) -> list[CheckResult]:
    args = [
        (cfg.seed, i, cfg.n_states, cfg.threshold_b, i < HITTING_MC_COUNT)
        for i in range(HITTING_COUNT)
    ]
    results = _map_ordered(_hitting_row, args, workers)
    rows = [r for r, _ in results]
    mc_rows = [m for _, m in results if m is not None]
    emit_csv(
        os.path.join(out_dir, "hitting.csv"),
        ["instance", "n_states", "threshold_b", "gamma", "condition_holds",
         "max_expected_time", "bound_excess"],
        rows,
    )
    emit_csv(
        os.path.join(out_dir, "hitting_mc.csv"),
        ["instance", "start", "exact", "mc_mean", "mc_stderr", "z"],
        mc_rows,
    )
    worst_excess = max(r[6] for r in rows)
    all_compliant = all(r[4] for r in rows)
    worst_z = max(abs(m[5]) for m in mc_rows) if mc_rows else 0.0
    checks = [
        _check("hitting/bound", worst_excess, BOUND_SLACK),
        CheckResult(
            name="hitting/drift-condition",
            passed=all_compliant,
            worst_residual=0.0 if all_compliant else 1.0,
            detail="uniform negative drift outside the target on every instance"
            if all_compliant else "some instance lost the drift condition",
        ),
        _check("hitting/mc-agreement", worst_z, HITTING_MC_Z_MAX,
               detail=f"max |z| over {len(mc_rows)} instances at "
                      f"{HITTING_MC_REPLICAS} replicas"),
    ]
    return checks


def _run_spectral(cfg: ExperimentConfig, out_dir: str, workers: int) -> list[CheckResult]:
    args = [(cfg.seed, i, cfg.n_states, cfg.beta, cfg.steps) for i in range(SPECTRAL_COUNT)]
    rows = _map_ordered(_spectral_row, args, workers)
    emit_csv(
        os.path.join(out_dir, "spectral.csv"),
        ["scenario", "mu2", "rho", "lambda2", "variance", "dirichlet", "chi0",
         "min_envelope_margin", "poincare_margin", "tightness_margin"],
        rows,
    )
    worst_env = max(-r[7] for r in rows)
    poincare_vals = [-r[8] for r in rows if not np.isnan(r[8])]
    tight_vals = [abs(r[9]) for r in rows if not np.isnan(r[9])]
    skipped = len(rows) - len(tight_vals)
    detail = f"{skipped} scenario(s) skipped for degenerate gap" if skipped else ""
    return [
        _check("spectral/convergence-envelope", worst_env, BOUND_SLACK),
        _check("spectral/poincare", max(poincare_vals, default=0.0), BOUND_SLACK,
               detail=detail),
        _check("spectral/poincare-tightness", max(tight_vals, default=0.0),
               POINCARE_TIGHT_TOL, detail=detail),
    ]


def _run_rlvr_identities(cfg: ExperimentConfig, out_dir: str, workers: int) -> list[CheckResult]:
    grid = cfg.lambda_grid or tuple(np.linspace(0.0, 2.0 / cfg.beta, 21))
    args = [
        (cfg.seed, i, cfg.n_prompts, cfg.n_responses, cfg.beta, grid)
        for i in range(IDENTITY_FAMILY_COUNT)
    ]
    nested = _map_ordered(_identity_rows, args, workers)
    rows = [row for batch in nested for row in batch]
    emit_csv(
        os.path.join(out_dir, "rlvr_identities.csv"),
        ["family", "lambda", "bernoulli_residual", "accuracy_derivative_residual",
         "kl_derivative_residual", "jensen_margin"],
        rows,
    )
    return [
        _check("rlvr-identities/bernoulli", max(r[2] for r in rows),
               BERNOULLI_IDENTITY_TOL),
        _check("rlvr-identities/accuracy-derivative", max(r[3] for r in rows),
               FINITE_DIFF),
        _check("rlvr-identities/kl-derivative", max(r[4] for r in rows), FINITE_DIFF),
        _check("rlvr-identities/jensen", max(-r[5] for r in rows), STRUCTURAL),
    ]


def _run_rlvr_flow(cfg: ExperimentConfig, out_dir: str, workers: int) -> list[CheckResult]:
    args = [
        (cfg.seed, i, cfg.n_prompts, cfg.n_responses, cfg.beta)
        for i in range(FLOW_FAMILY_COUNT)
    ]
    results = _map_ordered(_flow_rows, args, workers)
    rows = [row for batch, _ in results for row in batch]
    limits = [limit for _, limit in results]
    emit_csv(
        os.path.join(out_dir, "rlvr_flow.csv"),
        ["family", "t", "ode_residual", "flow_path_gap"],
        rows,
    )
    emit_csv(
        os.path.join(out_dir, "rlvr_flow_limit.csv"),
        ["family", "t", "tv_to_target"],
        limits,
    )
    return [
        _check("rlvr-flow/ode-residual", max(r[2] for r in rows), FINITE_DIFF),
        _check("rlvr-flow/path-consistency", max(r[3] for r in rows), STRUCTURAL),
        _check("rlvr-flow/limit-tv", max(l[2] for l in limits), FLOW_LIMIT_TV_TOL),
    ]


def _run_entropy_trace(cfg: ExperimentConfig, out_dir: str, workers: int) -> list[CheckResult]:
    args = [
        (cfg.seed, i, cfg.n_prompts, cfg.n_responses, cfg.beta, cfg.steps)
        for i in range(TRACE_FAMILY_COUNT)
    ]
    results = _map_ordered(_trace_rows, args, workers)
    rows = [row for batch, _ in results for row in batch]
    summaries = [s for _, s in results]
    emit_csv(
        os.path.join(out_dir, "entropy_trace.csv"),
        ["family", "n", "lambda", "mean_R", "mean_H", "kl_mean", "jensen_margin"],
        [(r[0],) + r[1:] for r in rows],
    )
    emit_csv(
        os.path.join(out_dir, "entropy_trace_fit.csv"),
        ["family", "target_accuracy", "applicable", "reason", "association",
         "fitted_a", "fitted_b", "fit_residual"],
        summaries,
    )
    applicable = [s for s in summaries if s[2]]
    checks = []
    if applicable:
        worst_assoc = max(s[4] for s in applicable)
        worst_resid = max(s[7] for s in applicable)
        checks.append(
            _check("entropy-trace/association", worst_assoc,
                   rlvr.TRACE_ASSOCIATION_MAX,
                   detail=f"{len(applicable)}/{len(summaries)} families applicable")
        )
        checks.append(
            _check("entropy-trace/fit-residual", worst_resid,
                   rlvr.TRACE_FIT_RESIDUAL_MAX)
        )
    else:
        checks.append(
            CheckResult(
                name="entropy-trace/fit",
                passed=True,
                worst_residual=0.0,
                detail="non-applicable: " + (summaries[0][3] if summaries else ""),
            )
        )
    return checks


def _check(name: str, worst: float, tol: float, detail: str = "") -> CheckResult:
    return CheckResult(
        name=name,
        passed=bool(worst <= tol),
        worst_residual=float(worst),
        detail=detail or f"tolerance {tol:g}",
    )


_DRIVERS = {
    "verify-db": _run_verify_db,
    "evolve": _run_evolve,
    "hitting": _run_hitting,
    "spectral": _run_spectral,
    "rlvr-identities": _run_rlvr_identities,
    "rlvr-flow": _run_rlvr_flow,
    "entropy-trace": _run_entropy_trace,
}


def run(cfg: ExperimentConfig, out_dir: str | None = None,
        workers: int | None = None) -> RunManifest:
    """Execute one experiment (or all of them) and write CSVs + manifest.

    Deterministic for a fixed config: identical bytes regardless of the
    worker count.
    """
    out = out_dir or cfg.output_path
    os.makedirs(out, exist_ok=True)
    n_workers = workers if workers is not None else _worker_count()
    kinds = list(EXPERIMENT_KINDS) if cfg.experiment == "all" else [cfg.experiment]
    manifest = RunManifest(
        config_digest=config_digest(cfg),
        artifact_version=__version__,
        kernel_backend=kernels.BACKEND,
        experiments=kinds,
        calibration={
            "trace_association_max": rlvr.TRACE_ASSOCIATION_MAX,
            "trace_fit_residual_max": rlvr.TRACE_FIT_RESIDUAL_MAX,
            "trace_premise_min": rlvr.TRACE_PREMISE_MIN,
        },
    )
    for kind in kinds:
        manifest.checks.extend(_DRIVERS[kind](cfg, out, n_workers))
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json() + "\n")
    return manifest
