"""Bayesian inverse problem for the 1D elliptic coefficient.

Uniform prior on ``[-1, 1]^K``, data ``y = (p(0.25), p(0.75)) + noise`` with
``noise ~ N(0, 0.25**2 I)``, and ``kappa_l`` the prior times the Gaussian
likelihood computed with the level-``l`` finite-element solution.  The
constant prior density is dropped from every level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LevelModel
from .fem import CoefficientField, EllipticFEM


@dataclass
class ObservationSetup:
    y: np.ndarray
    xi_std: float = 0.25
    obs_points: tuple = (0.25, 0.75)
    qoi_point: float = 0.5

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.xi_std <= 0:
            raise ValueError("xi_std must be positive")
        if self.y.shape != (len(self.obs_points),):
            raise ValueError("one datum per observation point")

    def to_dict(self):
        return {"y": self.y.tolist(), "xi_std": self.xi_std,
                "obs_points": list(self.obs_points), "qoi_point": self.qoi_point}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["y"]), d.get("xi_std", 0.25),
                   tuple(d.get("obs_points", (0.25, 0.75))), d.get("qoi_point", 0.5))


@dataclass
class MutationConfig:
    proposal_mix: float = 0.5      # probability of an independence move
    rw_step: float = 0.1
    coords_per_step: int = 5

    def __post_init__(self):
        if not 0.0 <= self.proposal_mix <= 1.0:
            raise ValueError("proposal_mix must lie in [0, 1]")
        if self.rw_step <= 0:
            raise ValueError("rw_step must be positive")
        if self.coords_per_step < 1:
            raise ValueError("coords_per_step must be >= 1")


def default_truth(K=50):
    k = np.arange(1, K + 1)
    return 0.5 * (-1.0) ** k


def reflect(v):
    """Fold values back into ``[-1, 1]`` by mirror reflection at the walls."""
    w = np.mod(v + 1.0, 4.0)
    return np.where(w > 2.0, 4.0 - w, w) - 1.0


def synthesize_data(truth_u, data_level=10, noise_seed=0, *, xi_std=0.25,
                    fem: EllipticFEM | None = None, obs_points=(0.25, 0.75)):
    """``y = G_{data_level}(truth_u) + xi`` with seeded Gaussian noise."""
    fem = fem or EllipticFEM()
    clean = fem.point_values(np.asarray(truth_u, float), data_level, list(obs_points))
    noise = np.random.default_rng(noise_seed).standard_normal(len(obs_points))
    return ObservationSetup(clean + xi_std * noise, xi_std, tuple(obs_points))


class EllipticInverseProblem(LevelModel):
    """:class:`LevelModel` for the elliptic coefficient problem.

    ``log kappa_l(u) = -|y - G_l(u)|^2 / (2 xi_std^2)`` inside the box and
    ``-inf`` outside.  Mutation is random-scan Metropolis-within-Gibbs on
    ``coords_per_step`` coordinates, mixing a fresh-uniform independence
    proposal with a reflected Gaussian random walk; both proposals are
    symmetric w.r.t. the uniform prior, so acceptance uses the ``kappa``
    ratio alone.
    """

    def __init__(self, obs: ObservationSetup, fem: EllipticFEM | None = None,
                 num_levels_available=10, mutation: MutationConfig | None = None,
                 zeta=1.0, fixed_fem_level=None):
        self.obs = obs
        # all kappa_l share one discretisation when set (G_l == 1)
        self.fixed_fem_level = fixed_fem_level
        self.fem = fem or EllipticFEM()
        self.num_levels_available = int(num_levels_available)
        self.mutation = mutation or MutationConfig()
        self.zeta = float(zeta)
        self.state_dim = self.fem.cf.K
        if self.mutation.coords_per_step > self.state_dim:
            raise ValueError("coords_per_step exceeds the state dimension")

    @classmethod
    def default(cls, *, k_offset=3, data_level=10, noise_seed=0, K=50, **kwargs):
        fem = EllipticFEM(CoefficientField(K=K), k_offset=k_offset)
        obs = synthesize_data(default_truth(K), data_level, noise_seed, fem=fem)
        return cls(obs, fem, **kwargs)

    def resolution(self, level):
        return self.fem.h(level)

    def forward(self, level, states):
        """Observation operator ``G_level``; shape ``(N, n_obs)``."""
        if self.fixed_fem_level is not None:
            level = self.fixed_fem_level
        return self.fem.point_values(np.atleast_2d(states), level, list(self.obs.obs_points))

    def log_density(self, level, states):
        self.check_level(level)
        states = np.asarray(states, dtype=float)
        single = states.ndim == 1
        u = np.atleast_2d(states)
        inside = np.all(np.abs(u) <= 1.0, axis=1)
        out = np.full(u.shape[0], -np.inf)
        if np.any(inside):
            resid = self.obs.y - self.forward(level, u[inside])
            out[inside] = -0.5 * np.sum(resid ** 2, axis=1) / self.obs.xi_std ** 2
        return out[0] if single else out

    def qoi(self, level):
        """``g(u) = p(qoi_point; u)`` at the given level, batched."""
        x = [self.obs.qoi_point]
        return lambda states: self.fem.point_values(np.atleast_2d(states), level, x)[:, 0]

    def sample_prior(self, n, rng):
        return rng.uniform(-1.0, 1.0, size=(n, self.state_dim))

    def propose(self, states, rng):
        """One mixed proposal per particle (no accept/reject)."""
        cfg = self.mutation
        n, d = states.shape
        picks = np.argsort(rng.random((n, d)), axis=1)[:, :cfg.coords_per_step]
        rows = np.arange(n)[:, None]
        indep = rng.random(n) < cfg.proposal_mix
        fresh = rng.uniform(-1.0, 1.0, size=picks.shape)
        walk = reflect(states[rows, picks] + cfg.rw_step * rng.standard_normal(picks.shape))
        prop = states.copy()
        prop[rows, picks] = np.where(indep[:, None], fresh, walk)
        return prop

    def mutate(self, level, states, rng, log_density=None):
        self.check_level(level)
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if log_density is None:
            log_density = self.log_density(level, states)
        prop = self.propose(states, rng)
        logp = self.log_density(level, prop)
        accept = np.log(rng.random(len(states))) < logp - log_density
        new = np.where(accept[:, None], prop, states)
        return new, np.where(accept, logp, log_density)

    def setup_dict(self):
        return {"obs": self.obs.to_dict(), "k_offset": self.fem.k_offset,
                "K": self.fem.cf.K, "num_levels_available": self.num_levels_available}
