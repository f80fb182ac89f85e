"""Estimators computed from a :class:`~mlsmc.engine.RunRecord`."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DegeneracyError, LevelRangeError


class MissingPotentialError(ValueError):
    """The record lacks the look-ahead potential a telescoped term needs."""


@dataclass
class EstimateReport:
    standard_nc: float
    telescoped_nc: float
    ml_expectation: float
    level_reached: int
    cost: float
    telescoped_extra_level: float | None = None


def _require(record, levels):
    if levels > record.num_levels:
        raise LevelRangeError(
            f"record holds levels 0..{record.num_levels - 1}, need 0..{levels - 1}"
        )


def _log_prefix(record, upto):
    """``sum_{k<upto} log eta_k^N(G_k)``."""
    return sum(math.log(record.per_level[k].mean_G) for k in range(upto))


def standard_nc_estimate(record, level):
    """Product estimator ``prod_{p<level} eta_p^N(G_p)`` of ``Z_level / Z_0``."""
    if level < 0:
        raise LevelRangeError("level must be >= 0")
    _require(record, level)
    return math.exp(_log_prefix(record, level))


def telescoped_nc_estimate(record, level):
    """Telescoped estimator of ``Z_level / Z_0``.

    ``eta_0^N(G_0) + sum_{p=2}^{level} gamma_{p-2}^N(G_{p-2}(G_{p-1} - 1))``
    where ``gamma_q^N(f) = prod_{k<q} eta_k^N(G_k) * eta_q^N(f)``.  Uses
    particle levels ``0..level-2`` only.  The correction terms are signed,
    so only the prefix products are formed in log space.
    """
    if level < 1:
        raise LevelRangeError("telescoped estimator needs level >= 1")
    _require(record, max(level - 1, 1))
    total = record.per_level[0].mean_G
    for p in range(2, level + 1):
        q = p - 2
        term = record.per_level[q].mean_G_Gnext_minus1
        if term is None:
            raise MissingPotentialError(
                f"level {q} has no G_{q + 1} evaluations (needed for level {level})"
            )
        total += math.exp(_log_prefix(record, q)) * term
    return total


def ml_expectation_estimate(record, level):
    """Collapsing-sum estimate of ``E_{eta_level}[g]``."""
    if level < 0:
        raise LevelRangeError("level must be >= 0")
    _require(record, max(level, 1))
    est = record.per_level[0].mean_g
    for l in range(1, level + 1):
        s = record.per_level[l - 1]
        if s.mean_G <= 0.0:
            raise DegeneracyError(f"eta_{l - 1}^N(G_{l - 1}) = 0")
        est += s.mean_gG / s.mean_G - s.mean_g
    return est


def relative_error(estimate, truth):
    if truth <= 0:
        raise ValueError("truth must be positive")
    return estimate / truth - 1.0


def report(record, level=None):
    """All three estimators at ``level`` (default: every particle level used)."""
    L = record.num_levels if level is None else level
    extra = None
    last = record.per_level[L - 1] if L >= 1 else None
    if last is not None and last.mean_G_Gnext_minus1 is not None:
        extra = telescoped_nc_estimate(record, L + 1)
    return EstimateReport(
        standard_nc=standard_nc_estimate(record, L),
        telescoped_nc=telescoped_nc_estimate(record, L),
        ml_expectation=ml_expectation_estimate(record, L),
        level_reached=L,
        cost=record.realized_cost,
        telescoped_extra_level=extra,
    )
