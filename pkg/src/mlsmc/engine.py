"""Multilevel SMC sampler: exact-ish level-0 draws, multinomial resampling
down to decreasing particle counts, and MCMC mutation.

One call to :func:`run_mlsmc` produces a :class:`RunRecord` holding every
empirical functional the normalizing-constant and expectation estimators
need, so estimators never touch particles.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import DegeneracyError, LevelModel, LevelRangeError

_PURPOSES = {"init": 0, "resample": 1, "mutate": 2}


def stream(seed, level, purpose):
    """Independent generator for ``(level, purpose)`` derived from ``seed``.

    Streams are keyed, not sequential, so the draws used at one level do
    not depend on how many numbers another level consumed.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(level), _PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class ParticleEnsemble:
    level: int
    states: np.ndarray
    log_potentials: np.ndarray
    extra_log_potentials: np.ndarray | None = None

    def __len__(self):
        return len(self.log_potentials)


@dataclass
class LevelSummary:
    """Empirical averages over the ``n`` particles at one level."""

    n: int
    mean_G: float
    mean_g: float
    mean_gG: float
    # eta_p^N(G_p (G_{p+1} - 1)); None when kappa_{p+2} is unavailable
    mean_G_Gnext_minus1: float | None = None


@dataclass
class RunRecord:
    per_level: list[LevelSummary]
    realized_cost: float
    seed: int
    wall_clock_s: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def num_levels(self):
        return len(self.per_level)

    @property
    def mean_G(self):
        return np.array([s.mean_G for s in self.per_level])


def _mean_exp(logv):
    m = np.max(logv)
    return float(np.exp(m) * np.mean(np.exp(logv - m)))


def resample_multinomial(log_weights, target_count, rng):
    """Draw ``target_count`` i.i.d. indices with probability ``∝ exp(log_weights)``."""
    lw = np.asarray(log_weights, dtype=float)
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise DegeneracyError("all resampling weights are zero")
    w = np.exp(lw - np.max(lw[np.isfinite(lw)]))
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(target_count), side="right")
    return np.minimum(idx, lw.size - 1)


def mutate_ensemble(model: LevelModel, level, states, rng, sweeps=1,
                    log_density=None, return_log_density=False):
    """Advance every particle by ``sweeps`` applications of ``M_level``."""
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    model.check_level(level)
    for _ in range(sweeps):
        states, log_density = model.mutate(level, states, rng, log_density)
    if return_log_density:
        return states, log_density
    return states


def initialize_level0(model: LevelModel, n0, rng, *, oversample=10, sweeps=10):
    """``n0`` particles approximately i.i.d. from ``eta_0``.

    Models exposing ``sample_level0`` are sampled exactly.  Otherwise draw
    ``oversample * n0`` points from the reference measure, importance
    resample ``n0`` of them by ``kappa_0`` and run ``sweeps`` level-0 MCMC
    sweeps to break up duplicates.
    """
    if n0 < 1:
        raise ValueError("N_0 must be >= 1")
    exact = getattr(model, "sample_level0", None)
    if exact is not None:
        return exact(n0, rng)
    pool = model.sample_prior(oversample * n0, rng)
    logw = np.asarray(model.log_density(0, pool), dtype=float)
    try:
        idx = resample_multinomial(logw, n0, rng)
    except DegeneracyError as exc:
        raise DegeneracyError("level-0 initialisation: every importance weight is zero") from exc
    states = pool[idx]
    if sweeps > 0:
        states = mutate_ensemble(model, 0, states, rng, sweeps, log_density=logw[idx])
    return states


def _level_counts(plan):
    counts = list(getattr(plan, "N", plan))
    if len(counts) < 1:
        raise ValueError("plan needs at least one level")
    if any(int(n) < 1 for n in counts):
        raise ValueError("every N_l must be >= 1")
    if any(b > a for a, b in zip(counts, counts[1:])):
        raise ValueError(f"particle counts must be non-increasing, got {counts}")
    return [int(n) for n in counts]


def run_mlsmc(model: LevelModel, plan, g=None, rng_seed=0, *, sweeps=5,
              init_oversample=10, init_sweeps=10, return_ensembles=False):
    """Run the multilevel SMC sampler over particle levels ``0..L-1``.

    Parameters
    ----------
    plan : AllocationPlan or sequence of ints
        Particle counts ``N_0 >= ... >= N_{L-1}``.
    g : callable(states) -> array, optional
        Quantity of interest for the expectation estimator.
    sweeps : int or sequence of int
        MCMC sweeps applied after resampling into each level.

    The potential ``G_{p+1}`` is evaluated at level-``p`` particles whenever
    ``kappa_{p+2}`` exists, and its cost is billed.
    """
    counts = _level_counts(plan)
    L = len(counts)
    if L > model.num_levels_available:
        raise LevelRangeError(
            f"plan with L={L} needs kappa_0..kappa_{L}; model provides up to "
            f"{model.num_levels_available}"
        )
    sweeps_per_level = [sweeps] * L if np.isscalar(sweeps) else list(sweeps)

    t0 = time.perf_counter()
    per_level = []
    ensembles = []
    cost = 0.0
    states = logk = log_g = None
    for p, n in enumerate(counts):
        if p == 0:
            states = initialize_level0(
                model, n, stream(rng_seed, 0, "init"),
                oversample=init_oversample, sweeps=init_sweeps,
            )
            logk = None
        else:
            try:
                idx = resample_multinomial(log_g, n, stream(rng_seed, p, "resample"))
            except DegeneracyError as exc:
                raise DegeneracyError(f"weight degeneracy resampling out of level {p - 1}") from exc
            states, logk = mutate_ensemble(
                model, p, states[idx], stream(rng_seed, p, "mutate"),
                sweeps_per_level[p], return_log_density=True,
            )
        if logk is None:
            logk = np.asarray(model.log_density(p, states), dtype=float)
        logk_next = np.asarray(model.log_density(p + 1, states), dtype=float)
        log_g = logk_next - logk
        if not np.any(np.isfinite(log_g)):
            raise DegeneracyError(f"all potentials G_{p} vanish at level {p}")

        extra = None
        if p + 2 <= model.num_levels_available:
            extra = np.asarray(model.log_density(p + 2, states), dtype=float) - logk_next

        gvals = np.zeros(n) if g is None else np.asarray(g(states), dtype=float)
        G = np.exp(log_g)
        summary = LevelSummary(
            n=n,
            mean_G=_mean_exp(log_g),
            mean_g=float(np.mean(gvals)),
            mean_gG=float(np.mean(gvals * G)),
        )
        if extra is not None:
            summary.mean_G_Gnext_minus1 = float(np.mean(G * np.expm1(extra)))
        per_level.append(summary)
        if return_ensembles:
            ensembles.append(ParticleEnsemble(p, states, log_g, extra))

        cost += n * model.cost_weight(p)
        if extra is not None:
            cost += n * model.cost_weight(p + 1)

    record = RunRecord(per_level, cost, int(rng_seed), time.perf_counter() - t0)
    if return_ensembles:
        return record, ensembles
    return record
