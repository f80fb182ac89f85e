"""Piecewise-linear finite elements for ``-(a p')' = f`` on ``[0, 1]``.

Homogeneous Dirichlet conditions, uniform mesh with ``2**(l + k)``
elements at level ``l``, and load ``f(x) = slope * x``.  The diffusion
coefficient is the truncated series

    a(x; u) = u_bar + sum_k u_k sigma_k phi_k(x),
    sigma_k = (2/5) 4**-k,  phi_k = sin(k pi x) (k odd), cos(k pi x) (k even).

Stiffness integrals use two-point Gauss quadrature per element; the load
vector is exact.  Solves are batched over parameter vectors and use a
vectorised Thomas sweep.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_GAUSS2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True)
class CoefficientField:
    u_bar: float = 0.15
    K: int = 50
    sigma: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.sigma is None:
            k = np.arange(1, self.K + 1)
            object.__setattr__(self, "sigma", 0.4 * 4.0 ** -k)
        if len(self.sigma) != self.K:
            raise ValueError("sigma must have length K")

    @property
    def lower_bound(self):
        """``u_bar - sum sigma_k``, a lower bound on ``a`` over the unit box."""
        return self.u_bar - float(np.sum(self.sigma))

    def basis(self, x):
        """``phi_k(x)`` for ``k = 1..K``; shape ``(len(x), K)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.arange(1, self.K + 1)
        arg = np.pi * x[:, None] * k[None, :]
        return np.where(k % 2 == 1, np.sin(arg), np.cos(arg))


def coefficient_at(cf: CoefficientField, u, x):
    """Evaluate ``a(x; u)``.  ``u`` may be ``(K,)`` or a batch ``(N, K)``."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise ValueError("x must lie in [0, 1]")
    u = np.asarray(u, dtype=float)
    vals = cf.u_bar + (u * cf.sigma) @ cf.basis(xs).T
    if xs.ndim == 0:
        return vals[..., 0]
    return vals


@dataclass
class FemSolution:
    level: int
    h: float
    nodal_values: np.ndarray   # interior nodes, boundary values are zero

    def point_value(self, x):
        return point_value(self, x)


def thomas(diag, off, rhs):
    """Solve symmetric tridiagonal systems, batched along the last axis.

    ``diag`` has shape ``(m, B)``, ``off`` shape ``(m-1, B)`` and ``rhs``
    shape ``(m,)`` or ``(m, B)``.  Returns ``(x, pivots)`` with ``x`` of
    shape ``(m, B)``; all pivots are positive iff the matrix is SPD.
    """
    m = diag.shape[0]
    rhs = np.broadcast_to(rhs.reshape(m, -1) if rhs.ndim == 1 else rhs, diag.shape)
    cp = np.empty_like(diag)
    dp = np.empty_like(diag)
    piv = np.empty_like(diag)
    piv[0] = diag[0]
    cp[0] = off[0] / piv[0] if m > 1 else 0.0
    dp[0] = rhs[0] / piv[0]
    for i in range(1, m):
        piv[i] = diag[i] - off[i - 1] * cp[i - 1]
        if i < m - 1:
            cp[i] = off[i] / piv[i]
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / piv[i]
    x = np.empty_like(diag)
    x[-1] = dp[-1]
    for i in range(m - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x, piv


class EllipticFEM:
    """Level-indexed solver with cached quadrature tables.

    ``dof_count`` accumulates ``2**(l+k)`` per solved parameter vector,
    the analytic work measure behind ``zeta = 1``.
    """

    def __init__(self, cf: CoefficientField | None = None, k_offset=3, load_slope=100.0):
        if k_offset < 1:
            raise ValueError("k_offset must be >= 1")
        self.cf = cf or CoefficientField()
        self.k_offset = int(k_offset)
        self.load_slope = float(load_slope)
        self.dof_count = 0
        self._tables = {}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_tables"] = {}
        return state

    def n_elements(self, level):
        if level < 0:
            raise ValueError("level must be >= 0")
        return 2 ** (level + self.k_offset)

    def h(self, level):
        return 1.0 / self.n_elements(level)

    def nodes(self, level):
        n = self.n_elements(level)
        return np.arange(1, n) / n

    def _table(self, level):
        tab = self._tables.get(level)
        if tab is None:
            n = self.n_elements(level)
            h = 1.0 / n
            mid = (np.arange(n) + 0.5) * h
            pts = (mid[:, None] + 0.5 * h * _GAUSS2[None, :]).ravel()
            tab = (self.cf.basis(pts) * self.cf.sigma).T.copy()  # (K, 2n)
            self._tables[level] = tab
        return tab

    def element_coefficients(self, u, level):
        """Per-element ``int a psi' psi'`` factor ``(a(g1) + a(g2)) / (2h)``.

        Returns shape ``(n_elements, B)``.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        n = self.n_elements(level)
        a = self.cf.u_bar + u @ self._table(level)          # (B, 2n)
        a = a.reshape(u.shape[0], n, 2).sum(axis=2) * (0.5 * n)
        return a.T

    def load(self, level):
        h = self.h(level)
        return self.load_slope * self.nodes(level) * h

    def solve(self, u, level, return_pivots=False):
        """Nodal values at interior nodes; ``(B, n-1)`` for a batch, ``(n-1,)`` otherwise."""
        single = np.asarray(u).ndim == 1
        ae = self.element_coefficients(u, level)             # (n, B)
        diag = ae[:-1] + ae[1:]
        off = -ae[1:-1]
        x, piv = thomas(diag, off, self.load(level))
        self.dof_count += self.n_elements(level) * ae.shape[1]
        x = x.T
        if single:
            x, piv = x[0], piv[:, 0]
        return (x, piv) if return_pivots else x

    def point_values(self, u, level, xs):
        """Solution at points ``xs`` (linear interpolation), batched over ``u``."""
        vals = np.atleast_2d(self.solve(u, level))
        xs = np.asarray(xs, dtype=float)
        n = self.n_elements(level)
        pos = xs * n
        i = np.minimum(np.floor(pos).astype(int), n - 1)
        w = pos - i
        padded = np.pad(vals, ((0, 0), (1, 1)))
        out = (1 - w) * padded[:, i] + w * padded[:, i + 1]
        return out[0] if np.asarray(u).ndim == 1 else out


def assemble_and_solve(cf: CoefficientField, u, level, k_offset=3, load_slope=100.0):
    fem = EllipticFEM(cf, k_offset, load_slope)
    return FemSolution(level=level, h=fem.h(level), nodal_values=fem.solve(u, level))


def point_value(sol: FemSolution, x):
    """Piecewise-linear interpolant of the nodal values (zero at the ends)."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise ValueError("x must lie in [0, 1]")
    n = len(sol.nodal_values) + 1
    grid = np.linspace(0.0, 1.0, n + 1)
    return np.interp(xs, grid, np.concatenate([[0.0], sol.nodal_values, [0.0]]))
