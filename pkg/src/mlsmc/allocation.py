"""Level and sample-size planning for a target relative error.

With ``h_l = M**-(l + k)``, bias ``~ h_L**alpha``, potential deviation
``~ h_l**beta`` and cost per sample ``~ h_l**-zeta``, the planner picks the
coarsest ``L`` meeting the bias target and sets

    N_l = scale * L * eps**-2 * K_L * h_l**((beta + zeta) / 2),
    K_L = sum_{l=1}^{L-1} h_l**((beta - zeta) / 2),

floored at ``c * L + 1`` and kept non-increasing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_MAX_LEVEL = 30


class CapacityError(ValueError):
    """Requested accuracy needs more levels than the configured cap."""


@dataclass(frozen=True)
class RateParameters:
    alpha: float
    beta: float
    zeta: float
    M_refine: int = 2
    k_offset: int = 1

    def __post_init__(self):
        if min(self.alpha, self.beta) <= 0 or self.zeta < 0:
            raise ValueError("need alpha, beta > 0 and zeta >= 0")
        if self.M_refine < 2 or self.k_offset < 1:
            raise ValueError("need M_refine >= 2 and k_offset >= 1")
        if 2 * self.alpha < max(self.beta, self.zeta):
            raise ValueError("rates must satisfy 2*alpha >= max(beta, zeta)")

    def resolution(self, level):
        return float(self.M_refine) ** -(level + self.k_offset)


@dataclass
class AllocationPlan:
    L: int
    N: list[int]
    h: list[float]
    predicted_cost: float
    epsilon: float
    weights: list[float] = field(default_factory=list)


def choose_max_level(rates: RateParameters, epsilon, max_level=DEFAULT_MAX_LEVEL):
    """Smallest ``L >= 1`` with ``h_L**alpha <= epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    # h_L**alpha <= eps  <=>  (L + k) * alpha * log M >= -log eps
    need = -math.log(epsilon) / (rates.alpha * math.log(rates.M_refine)) - rates.k_offset
    L = max(1, math.ceil(need - 1e-9))
    if L > max_level:
        raise CapacityError(f"epsilon={epsilon:g} needs L={L} > cap {max_level}")
    return L


def level_sum(rates: RateParameters, L):
    """``K_L``; for ``L == 1`` (empty sum) the ``l = 1`` term is used."""
    e = (rates.beta - rates.zeta) / 2
    terms = [rates.resolution(l) ** e for l in range(1, max(L, 2))]
    return sum(terms)


def choose_sample_sizes(rates: RateParameters, L, epsilon, scale=1.0, c=2):
    if L < 1:
        raise ValueError("L must be >= 1")
    KL = level_sum(rates, L)
    floor = int(c * L) + 1
    e = (rates.beta + rates.zeta) / 2
    N = []
    for l in range(L):
        raw = scale * L * epsilon ** -2 * KL * rates.resolution(l) ** e
        if not math.isfinite(raw) or raw > 2**62:
            raise OverflowError(f"N_{l} overflows ({raw:g})")
        n = max(math.ceil(raw), floor)
        N.append(min(n, N[-1]) if N else n)
    return N


def predicted_cost(plan: AllocationPlan, rates: RateParameters):
    """``sum_l N_l * h_l**-zeta``."""
    return float(sum(n * plan.h[l] ** -rates.zeta for l, n in enumerate(plan.N)))


def _plan(rates, L, N, epsilon):
    h = [rates.resolution(l) for l in range(L + 1)]
    plan = AllocationPlan(L=L, N=N, h=h, predicted_cost=0.0, epsilon=epsilon,
                          weights=[x ** -rates.zeta for x in h])
    plan.predicted_cost = predicted_cost(plan, rates)
    return plan


def plan_allocation(rates: RateParameters, epsilon, scale=1.0, c=2,
                    max_level=DEFAULT_MAX_LEVEL):
    """Multilevel plan for target relative error ``epsilon``."""
    L = choose_max_level(rates, epsilon, max_level)
    return _plan(rates, L, choose_sample_sizes(rates, L, epsilon, scale, c), epsilon)


def single_level_plan(rates: RateParameters, epsilon, scale=1.0,
                      max_level=DEFAULT_MAX_LEVEL):
    """Flat-allocation baseline: ``N = ceil(scale * eps**-2)`` at every level.

    Particle levels are ``0..L-1`` (the same ``L`` as the multilevel plan),
    so both target ``Z_L / Z_0``; ``h`` lists resolutions ``h_0..h_L``.
    """
    L = choose_max_level(rates, epsilon, max_level)
    n = math.ceil(scale * epsilon ** -2 - 1e-9)
    return _plan(rates, L, [n] * L, epsilon)


def plan_with_levels(rates: RateParameters, L, epsilon, scale=1.0, c=2, factor=1):
    """Multilevel plan with ``L`` forced (used for reference runs)."""
    N = [factor * n for n in choose_sample_sizes(rates, L, epsilon, scale, c)]
    return _plan(rates, L, N, epsilon)
