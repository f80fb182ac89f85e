"""Cost-versus-MSE studies, reference truth runs and variance-rate fits.

Replicates run on a process pool; every task carries its own derived seed
and results are gathered in task order, so output does not depend on the
number of workers.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import allocation as alloc
from .config import METHODS, ExperimentConfig
from .core import DegeneracyError, NumericalDomainError
from .engine import run_mlsmc
from .estimators import relative_error, standard_nc_estimate, telescoped_nc_estimate
from .fem import CoefficientField, EllipticFEM
from .inverse import EllipticInverseProblem, MutationConfig, default_truth, synthesize_data
from .oracle import FiniteFkModel, exact_gamma_measure

log = logging.getLogger(__name__)

CSV_COLUMNS = ("method", "epsilon", "replicate", "seed", "estimate", "truth",
               "rel_error", "analytic_cost", "wall_clock_s")
MAX_FLAGGED_FRACTION = 0.05


class StudyError(RuntimeError):
    pass


class TruthError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# problem construction and worker plumbing


def rates_of(cfg: ExperimentConfig):
    r = cfg.rates
    return alloc.RateParameters(r.alpha, r.beta, r.zeta, r.M_refine, r.k_offset)


def finest_level_needed(cfg: ExperimentConfig):
    L_max = alloc.choose_max_level(rates_of(cfg), min(cfg.study.epsilons),
                                   cfg.allocation.max_level)
    return max(L_max + cfg.truth.level_offset + 1, max(cfg.variance.levels) + 2)


def build_problem(cfg: ExperimentConfig):
    p = cfg.problem
    if p.kind == "finite":
        return FiniteFkModel.load(cfg.fixture_path())
    fem = EllipticFEM(CoefficientField(K=p.K), k_offset=cfg.rates.k_offset)
    truth_u = default_truth(p.K) if p.truth_u is None else np.asarray(p.truth_u, float)
    obs = synthesize_data(truth_u, p.data_level, p.noise_seed, xi_std=p.xi_std, fem=fem)
    return EllipticInverseProblem(
        obs, fem,
        num_levels_available=max(p.data_level, finest_level_needed(cfg)),
        mutation=MutationConfig(p.proposal_mix, p.rw_step, p.coords_per_step),
        zeta=cfg.rates.zeta,
        fixed_fem_level=p.fixed_fem_level,
    )


_WORKER = {}


def _init_worker(cfg_dict, base_dir):
    from .config import from_dict

    cfg = from_dict(cfg_dict, base_dir)
    _WORKER["cfg"] = cfg
    _WORKER["model"] = build_problem(cfg)


def derive_seed(base, *keys):
    ss = np.random.SeedSequence([int(base), *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])


def _run_one(task):
    """Execute one replicate; returns a dict of estimates (or a flag)."""
    kind, counts, seed = task["kind"], task["N"], task["seed"]
    cfg, model = _WORKER["cfg"], _WORKER["model"]
    t0 = time.perf_counter()
    try:
        rec = run_mlsmc(model, counts, rng_seed=seed, sweeps=cfg.study.sweeps,
                        init_oversample=cfg.study.init_oversample,
                        init_sweeps=cfg.study.init_sweeps)
    except (DegeneracyError, NumericalDomainError) as exc:
        return {"flagged": str(exc)}
    L = len(counts)
    out = {"cost": rec.realized_cost, "wall": time.perf_counter() - t0,
           "standard": standard_nc_estimate(rec, L)}
    if kind == "mlsmc":
        out["telescoped"] = telescoped_nc_estimate(rec, L)
        if rec.per_level[-1].mean_G_Gnext_minus1 is not None:
            out["telescoped_next"] = telescoped_nc_estimate(rec, L + 1)
    elif kind == "variance":
        out["mean_G"] = rec.mean_G.tolist()
    return out


def run_tasks(cfg: ExperimentConfig, tasks, workers=1):
    if workers <= 1:
        _init_worker(cfg.to_dict(), cfg.base_dir)
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(workers, initializer=_init_worker,
                             initargs=(cfg.to_dict(), cfg.base_dir)) as pool:
        return list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


# ---------------------------------------------------------------------------
# fitting


def fit_loglog_slope(points):
    """Least squares of ``log y`` on ``log x``; returns ``(slope, intercept, r2)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (x, y) points")
    if np.any(pts <= 0):
        raise ValueError("log-log fit needs strictly positive coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) == 0:
        raise ValueError("x values must not all coincide")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


# ---------------------------------------------------------------------------
# reference truth


@dataclass
class TruthResult:
    value: float
    se: float
    level: int
    replicates: int
    source: str


def compute_reference_truth(cfg: ExperimentConfig, workers=1, model=None):
    """Reference ``Z_Lref / Z_0`` with ``Lref = L_max + level_offset``.

    Finite fixtures are enumerated exactly.  Otherwise the standard
    estimator is averaged over ``truth.replicates`` runs with
    ``truth.n_factor`` times the planner's particle counts, and the
    relative standard error must stay below ``max_se_ratio * min(eps)``.
    """
    rates = rates_of(cfg)
    eps_min = min(cfg.study.epsilons)
    L_max = alloc.choose_max_level(rates, eps_min, cfg.allocation.max_level)
    model = model or build_problem(cfg)
    L_ref = min(L_max + cfg.truth.level_offset, model.num_levels_available)
    if cfg.problem.kind == "finite":
        return TruthResult(float(exact_gamma_measure(model, L_ref).sum()), 0.0,
                           L_ref, 0, "enumeration")
    plan = alloc.plan_with_levels(rates, L_ref, eps_min, cfg.allocation.scale,
                                  cfg.allocation.c, factor=cfg.truth.n_factor)
    tasks = [{"kind": "truth", "N": plan.N, "seed": derive_seed(cfg.study.seed, 1, r)}
             for r in range(cfg.truth.replicates)]
    results = [r for r in run_tasks(cfg, tasks, workers) if "flagged" not in r]
    vals = np.array([r["standard"] for r in results])
    if len(vals) < 2:
        raise TruthError("reference runs degenerate")
    value = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    limit = cfg.truth.max_se_ratio * eps_min
    if se / value >= limit:
        raise TruthError(
            f"reference relative SE {se / value:.3g} >= {limit:.3g}; increase "
            f"truth.replicates or truth.n_factor"
        )
    return TruthResult(value, se, L_ref, len(vals), "sampling")


# ---------------------------------------------------------------------------
# cost vs MSE study


@dataclass
class StudyResult:
    rows: list[dict]
    truth: TruthResult
    summary: list[dict]
    slopes: dict
    extra_level: list[dict] = field(default_factory=list)
    flagged: int = 0


def _method_kind(method):
    return "baseline" if method == "single-level-smc" else "mlsmc"


def cost_mse_study(cfg: ExperimentConfig, workers=1, truth: TruthResult | None = None):
    rates = rates_of(cfg)
    model = build_problem(cfg)
    truth = truth or compute_reference_truth(cfg, workers, model)
    methods = [m for m in METHODS if m in cfg.study.methods]
    kinds = sorted({_method_kind(m) for m in methods})

    plans = {}
    tasks = []
    for i, eps in enumerate(cfg.study.epsilons):
        plans["mlsmc", i] = alloc.plan_allocation(
            rates, eps, cfg.allocation.scale, cfg.allocation.c, cfg.allocation.max_level)
        plans["baseline", i] = alloc.single_level_plan(
            rates, eps, cfg.allocation.baseline_scale, cfg.allocation.max_level)
        for rep in range(cfg.study.replicates):
            seed = derive_seed(cfg.study.seed, 0, i, rep)
            for kind in kinds:
                tasks.append({"kind": kind, "N": plans[kind, i].N, "seed": seed,
                              "key": (kind, i, rep)})
    results = run_tasks(cfg, tasks, workers)
    by_key = {t["key"]: (t, r) for t, r in zip(tasks, results)}

    rows, summary, extra = [], [], []
    flagged = 0
    for method in methods:
        kind = _method_kind(method)
        field_name = "telescoped" if method == "mlsmc-telescoped" else "standard"
        for i, eps in enumerate(cfg.study.epsilons):
            ests, costs, nexts = [], [], []
            for rep in range(cfg.study.replicates):
                task, res = by_key[kind, i, rep]
                if "flagged" in res:
                    flagged += 1
                    log.warning("%s eps=%g rep=%d flagged: %s", method, eps, rep, res["flagged"])
                    est, cost, wall = float("nan"), float("nan"), float("nan")
                else:
                    est, cost, wall = res[field_name], res["cost"], res["wall"]
                    ests.append(est)
                    costs.append(cost)
                    if method == "mlsmc-telescoped" and "telescoped_next" in res:
                        nexts.append(res["telescoped_next"])
                rows.append({
                    "method": method, "epsilon": eps, "replicate": rep,
                    "seed": task["seed"], "estimate": est, "truth": truth.value,
                    "rel_error": relative_error(est, truth.value),
                    "analytic_cost": cost,
                    "wall_clock_s": wall if cfg.output.record_wall_clock else "",
                })
            ests = np.array(ests)
            summary.append({
                "method": method, "epsilon": eps, "L": plans[kind, i].L,
                "N": plans[kind, i].N, "runs": len(ests),
                "mse": float(np.mean((ests - truth.value) ** 2)) if len(ests) else float("nan"),
                "mean": float(ests.mean()) if len(ests) else float("nan"),
                "median_cost": float(np.median(costs)) if costs else float("nan"),
                "predicted_cost": plans[kind, i].predicted_cost,
            })
            if nexts:
                nexts = np.array(nexts)
                extra.append({"epsilon": eps, "level": plans[kind, i].L + 1,
                              "mean": float(nexts.mean()),
                              "mse": float(np.mean((nexts - truth.value) ** 2))})
    total = len(rows)
    if total and flagged / total > MAX_FLAGGED_FRACTION:
        raise StudyError(f"{flagged}/{total} runs degenerate (> {MAX_FLAGGED_FRACTION:.0%})")

    slopes = {}
    for method in methods:
        pts = [(s["mse"], s["median_cost"]) for s in summary
               if s["method"] == method and s["mse"] > 0 and np.isfinite(s["mse"])]
        if len(pts) >= 2:
            slope, intercept, r2 = fit_loglog_slope(pts)
            slopes[method] = {"slope": slope, "intercept": intercept, "r2": r2}
        else:
            slopes[method] = None
    return StudyResult(rows, truth, summary, slopes, extra, flagged)


def fitted_cost(fit, mse):
    return math.exp(fit["intercept"]) * mse ** fit["slope"]


def multilevel_cheaper(result: StudyResult):
    """True when both multilevel fits lie below the baseline fit at matched MSE.

    Fits are compared only where they interpolate data: at every observed
    MSE inside the overlap of the baseline's and the method's MSE ranges,
    and at the overlap endpoints.
    """
    base = result.slopes.get("single-level-smc")
    if base is None:
        return False
    base_mse = [s["mse"] for s in result.summary
                if s["method"] == "single-level-smc" and s["mse"] > 0]
    for method in ("mlsmc-standard", "mlsmc-telescoped"):
        fit = result.slopes.get(method)
        if fit is None:
            return False
        own = [s["mse"] for s in result.summary if s["method"] == method and s["mse"] > 0]
        lo, hi = max(min(own), min(base_mse)), min(max(own), max(base_mse))
        if lo > hi:
            return False
        probes = [lo, hi] + [m for m in own + base_mse if lo <= m <= hi]
        if any(fitted_cost(fit, m) >= fitted_cost(base, m) for m in probes):
            return False
    return True


def write_study(result: StudyResult, cfg: ExperimentConfig, out_dir, timing=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "study.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in result.rows:
            w.writerow(row)
    side = {
        "config_sha256": cfg.digest(),
        "truth": result.truth.value, "truth_se": result.truth.se,
        "truth_level": result.truth.level, "truth_source": result.truth.source,
        "slopes": result.slopes, "summary": result.summary,
        "telescoped_extra_level": result.extra_level,
        "flagged": result.flagged,
        "multilevel_cheaper": multilevel_cheaper(result),
    }
    if timing is not None:
        side["timing"] = timing
    (out / "study.json").write_text(json.dumps(side, indent=2, sort_keys=True))
    return out / "study.csv"


# ---------------------------------------------------------------------------
# variance rate


@dataclass
class VarianceRateResult:
    beta: float | None
    intercept: float | None
    r2: float | None
    levels: list[int]
    h: list[float]
    proxy: list[float]
    particles: int
    replicates: int
    degenerate: bool = False


def estimate_variance_rate(cfg: ExperimentConfig, workers=1):
    """Fit ``N * Var(eta_l^N(G_l))`` against ``h_l`` over the configured levels."""
    levels = sorted(cfg.variance.levels)
    if len(levels) < 2:
        raise ValueError("need at least two levels for a rate fit")
    model = build_problem(cfg)
    n = cfg.variance.particles
    counts = [n] * (levels[-1] + 1)
    tasks = [{"kind": "variance", "N": counts, "seed": derive_seed(cfg.study.seed, 2, r)}
             for r in range(cfg.variance.replicates)]
    results = [r for r in run_tasks(cfg, tasks, workers) if "flagged" not in r]
    if len(results) < 2:
        raise StudyError("variance-rate runs degenerate")
    means = np.array([r["mean_G"] for r in results])
    proxy = [float(n * np.var(means[:, l], ddof=1)) for l in levels]
    h = [model.resolution(l) for l in levels]
    usable = [(hh, v) for hh, v in zip(h, proxy) if v > 0]
    if not usable:
        return VarianceRateResult(None, None, None, levels, h, proxy, n, len(results), True)
    if len(usable) < 2:
        raise StudyError("fewer than two levels with positive variance")
    slope, intercept, r2 = fit_loglog_slope(usable)
    return VarianceRateResult(slope, intercept, r2, levels, h, proxy, n, len(results))


def write_variance_rate(res: VarianceRateResult, cfg, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "variance_rate.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "h", "n_times_var"])
        for l, hh, v in zip(res.levels, res.h, res.proxy):
            w.writerow([l, hh, v])
    side = {"config_sha256": cfg.digest(), "beta_hat": res.beta, "r2": res.r2,
            "intercept": res.intercept, "degenerate": res.degenerate,
            "particles": res.particles, "replicates": res.replicates}
    (out / "variance_rate.json").write_text(json.dumps(side, indent=2, sort_keys=True))
    return out / "variance_rate.csv"
