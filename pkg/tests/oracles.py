"""Reference computations written independently of the package.

Nothing here imports mlsmc: path enumeration for Feynman-Kac masses,
a dense finite-element assembly with its own quadrature, and closed
forms for the constant-coefficient problem.
"""
import itertools

import numpy as np


def path_sum_gamma(kappa, kernels, level):
    """``gamma_level(1)`` by summing over every state path ``x_0..x_level``.

    ``gamma_0 = eta_0 = kappa_0 / Z_0``; each step weights by
    ``kappa_{p+1}/kappa_p`` and moves with ``kernels[p+1]``.
    """
    kappa = np.asarray(kappa, float)
    n = kappa.shape[1]
    eta0 = kappa[0] / kappa[0].sum()
    total = 0.0
    for path in itertools.product(range(n), repeat=level + 1):
        w = eta0[path[0]]
        for p in range(level):
            x, y = path[p], path[p + 1]
            w *= kappa[p + 1, x] / kappa[p, x] * kernels[p + 1][x, y]
        total += w
    return total


def path_sum_eta(kappa, kernels, level):
    """Normalised flow ``eta_level`` by the same path enumeration."""
    kappa = np.asarray(kappa, float)
    n = kappa.shape[1]
    eta0 = kappa[0] / kappa[0].sum()
    out = np.zeros(n)
    for path in itertools.product(range(n), repeat=level + 1):
        w = eta0[path[0]]
        for p in range(level):
            x, y = path[p], path[p + 1]
            w *= kappa[p + 1, x] / kappa[p, x] * kernels[p + 1][x, y]
        out[path[-1]] += w
    return out / out.sum()


def mh_independence_matrix(target):
    """Metropolis matrix with uniform proposal, built entry by entry."""
    pi = np.asarray(target, float) / np.sum(target)
    n = len(pi)
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                P[i, j] = min(1.0, pi[j] / pi[i]) / n
        P[i, i] = 1.0 - P[i].sum()
    return P


def coefficient(u, x, u_bar=0.15):
    u = np.asarray(u, float)
    out = np.full(np.shape(x), u_bar, dtype=float)
    for k in range(1, len(u) + 1):
        phi = np.sin(k * np.pi * x) if k % 2 else np.cos(k * np.pi * x)
        out = out + u[k - 1] * 0.4 * 4.0 ** -k * phi
    return out


def dense_fem(u, n_elements, gauss_points=2, slope=100.0):
    """Nodal values from a dense stiffness matrix and ``numpy.linalg.solve``.

    Element integrals ``int a`` use Gauss-Legendre with ``gauss_points``
    nodes; the load ``int slope * x * psi_i`` uses 6-point Gauss, which is
    exact for the quadratic integrand.
    """
    h = 1.0 / n_elements
    xg, wg = np.polynomial.legendre.leggauss(gauss_points)
    xl, wl = np.polynomial.legendre.leggauss(6)
    A = np.zeros((n_elements + 1, n_elements + 1))
    b = np.zeros(n_elements + 1)
    for e in range(n_elements):
        x0 = e * h
        pts = x0 + 0.5 * h * (xg + 1.0)
        int_a = 0.5 * h * np.sum(wg * coefficient(u, pts))
        A[e:e + 2, e:e + 2] += int_a / h ** 2 * np.array([[1.0, -1.0], [-1.0, 1.0]])
        lp = x0 + 0.5 * h * (xl + 1.0)
        f = slope * lp
        b[e] += 0.5 * h * np.sum(wl * f * (x0 + h - lp) / h)
        b[e + 1] += 0.5 * h * np.sum(wl * f * (lp - x0) / h)
    return np.linalg.solve(A[1:-1, 1:-1], b[1:-1])


def dense_point(u, n_elements, x, gauss_points=2):
    vals = np.concatenate([[0.0], dense_fem(u, n_elements, gauss_points), [0.0]])
    return np.interp(x, np.linspace(0, 1, n_elements + 1), vals)


def exact_constant(x, a=0.15, slope=100.0):
    """Solution of ``-a p'' = slope * x`` with ``p(0) = p(1) = 0``."""
    x = np.asarray(x, float)
    return slope / (6.0 * a) * x * (1.0 - x ** 2)
