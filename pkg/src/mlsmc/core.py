"""Level hierarchy interface shared by every concrete problem.

A :class:`LevelModel` describes a sequence of unnormalised densities
``kappa_0, kappa_1, ...`` on a common state space, each tied to a
resolution ``h_l``.  Consecutive densities define the incremental
potentials ``G_l = kappa_{l+1} / kappa_l`` that drive resampling.

States are handled in batches: a batch is a numpy array whose first axis
indexes particles (shape ``(N, d)`` for real boxes, ``(N,)`` for finite
state spaces).  All density arithmetic is done in log space.
"""
from __future__ import annotations

import abc

import numpy as np


class LevelRangeError(IndexError):
    """A level index outside the range supported by a model or record."""


class NumericalDomainError(ArithmeticError):
    """A log-density or potential evaluated to a non-finite value."""


class DegeneracyError(RuntimeError):
    """All importance weights vanished (numerically) at some stage."""


class LevelModel(abc.ABC):
    """Abstract hierarchy ``{kappa_l, M_l, C_l, h_l}``.

    Subclasses set ``num_levels_available`` (the largest ``l`` for which
    ``kappa_l`` can be evaluated) and ``state_dim``, and implement
    :meth:`log_density`, :meth:`mutate`, :meth:`resolution` and
    :meth:`sample_prior`.

    ``log_density`` and ``mutate`` must be pure functions of their inputs
    (plus the explicit generator handed to ``mutate``) so that particles
    can be processed by concurrent workers.
    """

    num_levels_available: int
    state_dim: int
    #: cost exponent used by the default :meth:`cost_weight`
    zeta: float = 1.0

    @abc.abstractmethod
    def log_density(self, level: int, states: np.ndarray) -> np.ndarray:
        """Return ``log kappa_level`` for each state in the batch."""

    @abc.abstractmethod
    def mutate(self, level, states, rng, log_density=None):
        """Apply one eta_level-invariant Markov step to every particle.

        ``log_density`` optionally carries the current values of
        ``log kappa_level`` for ``states`` so that Metropolis kernels can
        skip re-evaluating them.  Returns ``(new_states, new_log_density)``.
        """

    @abc.abstractmethod
    def resolution(self, level: int) -> float:
        """Accuracy parameter ``h_l``; strictly decreasing in ``level``."""

    @abc.abstractmethod
    def sample_prior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` states from the reference measure ``du``."""

    def cost_weight(self, level: int) -> float:
        """Analytic cost of one ``kappa_level`` evaluation, ``h_l ** -zeta``."""
        return float(self.resolution(level)) ** (-self.zeta)

    def check_level(self, level: int) -> None:
        if not 0 <= level <= self.num_levels_available:
            raise LevelRangeError(
                f"level {level} outside 0..{self.num_levels_available}"
            )


def log_potential(model: LevelModel, level: int, states) -> np.ndarray:
    """``log G_level = log kappa_{level+1} - log kappa_level`` per state.

    Accepts a single state or a batch; the return shape follows the
    leading (particle) axis of ``states``.
    """
    if level < 0 or level + 1 > model.num_levels_available:
        raise LevelRangeError(
            f"potential G_{level} needs densities {level} and {level + 1}; "
            f"model provides 0..{model.num_levels_available}"
        )
    fine = np.asarray(model.log_density(level + 1, states), dtype=float)
    coarse = np.asarray(model.log_density(level, states), dtype=float)
    out = fine - coarse
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(np.atleast_1d(out)))[0])
        state = np.asarray(states)
        offending = state[bad] if state.ndim > 0 and state.shape[0] > bad else state
        raise NumericalDomainError(
            f"non-finite log potential at level {level}, state {offending!r}"
        )
    return out


def potential(model: LevelModel, level: int, states) -> np.ndarray:
    """``G_level`` in linear space."""
    logg = log_potential(model, level, states)
    with np.errstate(over="raise"):
        try:
            return np.exp(logg)
        except FloatingPointError as exc:
            raise NumericalDomainError(
                f"potential G_{level} overflows (max log value {np.max(logg):.3g})"
            ) from exc
