import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mlsmc.experiments import fit_loglog_slope
from mlsmc.fem import (CoefficientField, EllipticFEM, assemble_and_solve, coefficient_at,
                       point_value, thomas)
from mlsmc.inverse import default_truth

import oracles

CF = CoefficientField()
box = arrays(np.float64, 50, elements=st.floats(-1.0, 1.0))


def test_coefficient_examples():
    xs = np.linspace(0, 1, 11)
    assert np.allclose(coefficient_at(CF, np.zeros(50), xs), 0.15)
    e1 = np.eye(50)[0]
    assert coefficient_at(CF, e1, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert CF.lower_bound == pytest.approx(0.15 - 2 / 15, abs=1e-15)
    with pytest.raises(ValueError):
        coefficient_at(CF, e1, 1.5)


@settings(max_examples=60, deadline=None)
@given(u=box, x=st.floats(0.0, 1.0))
def test_coefficient_lower_bound(u, x):
    a = coefficient_at(CF, u, x)
    assert a >= 0.15 - 2 / 15 - 1e-15
    assert a == pytest.approx(oracles.coefficient(u, x), abs=1e-14)


@pytest.mark.parametrize("level", range(5))
def test_matches_dense_oracle(level):
    rng = np.random.default_rng(level)
    fem = EllipticFEM(CF, k_offset=3)
    for u in rng.uniform(-1, 1, size=(3, 50)):
        ref = oracles.dense_fem(u, 2 ** (level + 3), gauss_points=2)
        got = fem.solve(u, level)
        assert np.max(np.abs(got - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_quadrature_error_small_against_high_order():
    u = default_truth(50)
    got = EllipticFEM(CF).solve(u, 4)
    ref = oracles.dense_fem(u, 2 ** 7, gauss_points=6)
    assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) < 1e-3


def test_zero_load_zero_solution():
    fem = EllipticFEM(CF, load_slope=0.0)
    assert np.all(fem.solve(default_truth(50), 3) == 0.0)


def test_point_value_boundary_and_nodes():
    sol = assemble_and_solve(CF, default_truth(50), 2)
    assert point_value(sol, 0.0) == 0.0 and point_value(sol, 1.0) == 0.0
    nodes = np.arange(1, 32) / 32
    assert np.array_equal(point_value(sol, nodes), sol.nodal_values)
    with pytest.raises(ValueError):
        point_value(sol, -0.1)


def test_point_values_agree_with_interp():
    fem = EllipticFEM(CF)
    u = np.random.default_rng(1).uniform(-1, 1, size=(4, 50))
    xs = [0.0, 0.1, 0.25, 0.5, 0.77, 1.0]
    pv = fem.point_values(u, 2, xs)
    for i in range(4):
        sol = assemble_and_solve(CF, u[i], 2)
        assert np.allclose(pv[i], point_value(sol, xs), rtol=1e-13, atol=1e-13)


def test_constant_coefficient_closed_form():
    fem = EllipticFEM(CF)
    xs = [0.25, 0.5, 0.75]
    expected = oracles.exact_constant(np.array(xs))
    assert np.allclose(expected, [26.0417, 41.6667, 36.4583], atol=5e-5)
    for l in range(7):
        assert np.allclose(fem.point_values(np.zeros(50), l, xs), expected, atol=1e-3)


def test_variable_coefficient_second_order():
    fem = EllipticFEM(CF)
    u = default_truth(50)
    ref = fem.point_values(u, 12, [0.5])[0]
    pts = [(fem.h(l), abs(fem.point_values(u, l, [0.5])[0] - ref)) for l in range(7)]
    slope, _, r2 = fit_loglog_slope(pts)
    assert slope == pytest.approx(2.0, abs=0.2)
    assert r2 > 0.99


@settings(max_examples=30, deadline=None)
@given(u=box, level=st.integers(0, 4))
def test_pivots_positive(u, level):
    x, piv = EllipticFEM(CF).solve(u, level, return_pivots=True)
    assert np.all(piv > 0)
    assert np.all(np.isfinite(x))


@settings(max_examples=50, deadline=None)
@given(m=st.integers(1, 30), seed=st.integers(0, 2**32 - 1))
def test_thomas_matches_dense(m, seed):
    rng = np.random.default_rng(seed)
    off = -rng.uniform(0.1, 1.0, size=(max(m - 1, 0), 3))
    diag = rng.uniform(0.1, 1.0, size=(m, 3))
    diag[:-1] += -off
    diag[1:] += -off
    rhs = rng.normal(size=m)
    x, piv = thomas(diag, off, rhs)
    for b in range(3):
        A = np.diag(diag[:, b]) + np.diag(off[:, b], 1) + np.diag(off[:, b], -1)
        assert np.allclose(x[:, b], np.linalg.solve(A, rhs), rtol=1e-9, atol=1e-12)
    assert np.all(piv > 0)


def test_batched_equals_single():
    fem = EllipticFEM(CF)
    u = np.random.default_rng(2).uniform(-1, 1, size=(5, 50))
    batch = fem.solve(u, 3)
    for i in range(5):
        assert np.allclose(batch[i], fem.solve(u[i], 3), rtol=1e-13, atol=0)


def test_dof_count():
    fem = EllipticFEM(CF)
    fem.solve(np.zeros((3, 50)), 2)
    assert fem.dof_count == 3 * 32
    with pytest.raises(ValueError):
        fem.n_elements(-1)
