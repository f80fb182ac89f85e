"""Exact Feynman-Kac computations on small finite state spaces.

Everything here is dense linear algebra on at most 64 states, so all
quantities (``gamma_l``, ``eta_l``, ``Q_{p,n}``, ``Phi_n``) are available
to double precision.  The module doubles as a concrete :class:`LevelModel`
whose particle runs can be compared against enumeration.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .core import DegeneracyError, LevelModel, LevelRangeError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAX_STATES = 64


class FiniteFkModel(LevelModel):
    """Finite-state hierarchy with explicit densities and kernels.

    Parameters
    ----------
    kappa : array (levels, n_states)
        Positive unnormalised densities w.r.t. counting measure.
    kernels : sequence of (n_states, n_states) row-stochastic matrices
        ``kernels[l]`` is the mutation kernel used when particles move to
        level ``l``.  ``kernels[0]`` is never used by the sampler (level 0
        is sampled exactly) but is kept so indices line up.
    resolutions : optional sequence of ``h_l``; defaults to ``2**-l``.
    zeta : cost exponent for :meth:`cost_weight`.

    Particles are 1-D integer arrays of state indices.
    """

    def __init__(self, kappa, kernels, resolutions=None, zeta=1.0):
        kappa = np.array(kappa, dtype=float)
        if kappa.ndim != 2:
            raise ValueError("kappa must be a (levels, n_states) matrix")
        levels, n_states = kappa.shape
        if n_states > MAX_STATES:
            raise ValueError(f"at most {MAX_STATES} states supported, got {n_states}")
        if not np.all(np.isfinite(kappa)) or np.any(kappa <= 0):
            raise ValueError("kappa entries must be finite and strictly positive")
        kernels = [np.array(k, dtype=float) for k in kernels]
        if len(kernels) != levels:
            raise ValueError(f"need one kernel per level ({levels}), got {len(kernels)}")
        for l, k in enumerate(kernels):
            if k.shape != (n_states, n_states):
                raise ValueError(f"kernel {l} has shape {k.shape}")
            if np.any(k < 0) or np.max(np.abs(k.sum(axis=1) - 1.0)) > 1e-12:
                raise ValueError(f"kernel {l} is not row-stochastic")
        if resolutions is None:
            resolutions = [2.0 ** -l for l in range(levels)]
        resolutions = [float(h) for h in resolutions]
        if len(resolutions) != levels or any(
            b >= a for a, b in zip(resolutions, resolutions[1:])
        ):
            raise ValueError("resolutions must be strictly decreasing, one per level")

        self.kappa = kappa
        self.kernels = kernels
        self.levels = levels
        self.n_states = n_states
        self.resolutions = resolutions
        self.zeta = float(zeta)
        self.num_levels_available = levels - 1
        self.state_dim = 1
        self._cumulative = [np.cumsum(k, axis=1) for k in kernels]

    # -- LevelModel interface -------------------------------------------
    def log_density(self, level, states):
        self.check_level(level)
        return np.log(self.kappa[level][np.asarray(states, dtype=int)])

    def mutate(self, level, states, rng, log_density=None):
        self.check_level(level)
        states = np.asarray(states, dtype=int)
        cum = self._cumulative[level][states]
        u = rng.random(states.shape)
        new = np.minimum((u[..., None] >= cum).sum(axis=-1), self.n_states - 1)
        return new, np.log(self.kappa[level][new])

    def resolution(self, level):
        self.check_level(level)
        return self.resolutions[level]

    def sample_prior(self, n, rng):
        return rng.integers(0, self.n_states, size=n)

    def sample_level0(self, n, rng):
        """Exact i.i.d. draws from ``eta_0``."""
        return rng.choice(self.n_states, size=n, p=self.eta(0))

    # -- exact quantities -------------------------------------------------
    def eta(self, level):
        self.check_level(level)
        k = self.kappa[level]
        return k / k.sum()

    def potential_vector(self, level):
        """``G_level`` as a vector over states."""
        if not 0 <= level < self.num_levels_available:
            raise LevelRangeError(f"G_{level} undefined for {self.levels} levels")
        return self.kappa[level + 1] / self.kappa[level]

    def normalizing_ratio(self, level):
        """``Z_level / Z_0`` by direct summation."""
        self.check_level(level)
        return self.kappa[level].sum() / self.kappa[0].sum()

    # -- serialisation ------------------------------------------------------
    def to_dict(self):
        return {
            "kappa": self.kappa.tolist(),
            "kernels": [k.tolist() for k in self.kernels],
            "resolutions": list(self.resolutions),
            "zeta": self.zeta,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["kappa"],
            data["kernels"],
            resolutions=data.get("resolutions"),
            zeta=data.get("zeta", 1.0),
        )

    def save(self, path):
        import tomli_w

        Path(path).write_text(tomli_w.dumps({"fixture": self.to_dict()}))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh)["fixture"])


# ---------------------------------------------------------------------------
# kernel and fixture construction


def independence_mh_kernel(target, proposal=None):
    """Transition matrix of independence Metropolis-Hastings for ``target``.

    Satisfies detailed balance w.r.t. ``target`` exactly, and every entry
    is positive when ``target`` and ``proposal`` are, so the kernel has a
    strictly positive minorization coefficient.
    """
    pi = np.asarray(target, dtype=float)
    pi = pi / pi.sum()
    n = pi.size
    q = np.full(n, 1.0 / n) if proposal is None else np.asarray(proposal, float)
    q = q / q.sum()
    # accept(i -> j) = min(1, pi_j q_i / (pi_i q_j))
    ratio = (pi[None, :] * q[:, None]) / (pi[:, None] * q[None, :])
    P = q[None, :] * np.minimum(1.0, ratio)
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def invariant_model(kappa, resolutions=None, zeta=1.0, proposal=None):
    """Finite model whose kernels are independence samplers for each eta_l."""
    kappa = np.asarray(kappa, dtype=float)
    kernels = [independence_mh_kernel(row, proposal) for row in kappa]
    return FiniteFkModel(kappa, kernels, resolutions=resolutions, zeta=zeta)


def random_model(n_states, levels, rng, *, low=0.5, high=2.0, invariant=True):
    """Random fixture with ``kappa`` entries uniform on ``[low, high]``.

    With ``invariant=False`` the kernels are random stochastic matrices that
    in general do not leave ``eta_l`` invariant.
    """
    kappa = rng.uniform(low, high, size=(levels, n_states))
    if invariant:
        return invariant_model(kappa)
    kernels = []
    for _ in range(levels):
        m = rng.uniform(0.0, 1.0, size=(n_states, n_states)) ** 3
        kernels.append(m / m.sum(axis=1, keepdims=True))
    return FiniteFkModel(kappa, kernels)


def decaying_potential_model(n_states, levels, rate, *, amplitude=0.5, seed=0, k_offset=0):
    """Fixture with ``||G_l - 1||_inf ~ amplitude * h_{l+1}**(rate/2)``.

    Densities are built as ``kappa_{l+1} = kappa_l * (1 + amplitude *
    h_{l+1}**(rate/2) * w)`` for a fixed pattern ``w`` in ``[-1, 1]``, so
    the variance of ``G_l`` under ``eta_l`` decays like ``h_l**rate``.
    Resolutions are ``2**-(l + k_offset)``.
    """
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1.0, 1.0, size=n_states)
    h = [2.0 ** -(l + k_offset) for l in range(levels)]
    if amplitude * h[1] ** (rate / 2) >= 1.0:
        raise ValueError("amplitude too large: kappa would turn non-positive")
    rows = [rng.uniform(0.5, 2.0, size=n_states)]
    for l in range(1, levels):
        rows.append(rows[-1] * (1.0 + amplitude * h[l] ** (rate / 2) * w))
    return invariant_model(np.array(rows), resolutions=h)


# ---------------------------------------------------------------------------
# exact Feynman-Kac quantities


def exact_gamma_measure(model: FiniteFkModel, level):
    """Unnormalised flow ``gamma_level`` as a vector over states.

    ``gamma_0 = eta_0`` and ``gamma_{p+1} = (gamma_p * G_p) M_{p+1}``.
    """
    model.check_level(level)
    v = model.eta(0)
    for p in range(level):
        v = (v * model.potential_vector(p)) @ model.kernels[p + 1]
    return v


def product_of_means(model: FiniteFkModel, level):
    """``prod_{p<level} eta_p(G_p)`` using the enumerated ``eta_p``."""
    model.check_level(level)
    out = 1.0
    for p in range(level):
        out *= float(model.eta(p) @ model.potential_vector(p))
    return out


def semigroup_apply(model: FiniteFkModel, p, n, f):
    """``Q_{p,n} f`` with ``Q_m(x, dy) = G_{m-1}(x) M_m(x, dy)``.

    Identity when ``p == n``.
    """
    if not 0 <= p <= n <= model.num_levels_available:
        raise LevelRangeError(f"need 0 <= p <= n <= {model.num_levels_available}")
    v = np.asarray(f, dtype=float).copy()
    for m in range(n, p, -1):
        v = model.potential_vector(m - 1) * (model.kernels[m] @ v)
    return v


def selection_mutation(model: FiniteFkModel, n, mu):
    """``Phi_n(mu) = mu(G_{n-1} M_n) / mu(G_{n-1})``."""
    if not 1 <= n <= model.num_levels_available:
        raise LevelRangeError(f"Phi_{n} undefined")
    mu = np.asarray(mu, dtype=float)
    weighted = mu * model.potential_vector(n - 1)
    mass = weighted.sum()
    if mass <= 0.0:
        raise DegeneracyError(f"mu(G_{n - 1}) = 0")
    return (weighted / mass) @ model.kernels[n]


def telescoping_identity_check(model: FiniteFkModel, level):
    """Relative residual of the telescoped decomposition of ``gamma_level(1)``.

    Compares ``gamma_level(1)`` against
    ``eta_0(G_0) + sum_{p=2}^{level} gamma_{p-2}(G_{p-2} (G_{p-1} - 1))``,
    both computed from the exact flow.  Vanishes (to rounding) when every
    kernel leaves its own ``eta_l`` invariant.
    """
    if level < 2:
        raise ValueError("the telescoped decomposition needs level >= 2")
    total = exact_gamma_measure(model, level).sum()
    rhs = float(model.eta(0) @ model.potential_vector(0))
    for p in range(2, level + 1):
        gamma = exact_gamma_measure(model, p - 2)
        g_prev = model.potential_vector(p - 2)
        g_next = model.potential_vector(p - 1)
        rhs += float(gamma @ (g_prev * (g_next - 1.0)))
    return abs(total - rhs) / abs(total)


def minorization_coefficient(M):
    """Largest ``rho`` with ``M(u, .) >= rho * M(v, .)`` for all rows ``u, v``."""
    M = np.asarray(M, dtype=float)
    col_min = M.min(axis=0)
    col_max = M.max(axis=0)
    live = col_max > 0
    if not np.any(live):
        return 0.0
    return float(np.min(col_min[live] / col_max[live]))
