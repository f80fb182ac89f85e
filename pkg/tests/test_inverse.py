import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlsmc.core import log_potential
from mlsmc.engine import mutate_ensemble
from mlsmc.fem import CoefficientField, EllipticFEM
from mlsmc.inverse import (EllipticInverseProblem, MutationConfig, ObservationSetup,
                           default_truth, reflect, synthesize_data)

import oracles


def problem(y=(27.5, 40.3), **kw):
    return EllipticInverseProblem(ObservationSetup(np.array(y)), num_levels_available=5, **kw)


def test_log_kappa_zero_residual():
    u = default_truth(50)
    prob = problem()
    prob.obs.y = prob.forward(2, u[None])[0]
    assert prob.log_density(2, u) == 0.0


def test_log_kappa_one_sigma():
    u = np.zeros(50)
    prob = problem()
    prob.obs.y = prob.forward(1, u[None])[0] + np.array([0.25, 0.0])
    assert prob.log_density(1, u) == pytest.approx(-0.5, abs=1e-12)


def test_log_kappa_dense_pipeline():
    obs = synthesize_data(np.zeros(50), data_level=6, noise_seed=3)
    prob = EllipticInverseProblem(obs, num_levels_available=6)
    for l in range(4):
        g = oracles.dense_point(np.zeros(50), 2 ** (l + 3), [0.25, 0.75])
        ref = -0.5 * np.sum((obs.y - g) ** 2) / 0.25 ** 2
        assert prob.log_density(l, np.zeros(50)) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_log_kappa_outside_box():
    u = np.zeros((2, 50))
    u[1, 7] = 1.01
    out = problem().log_density(0, u)
    assert np.isfinite(out[0]) and out[1] == -np.inf


def test_synthesize_reproducible_and_noise_free_limit():
    a = synthesize_data(default_truth(50), 4, noise_seed=11)
    b = synthesize_data(default_truth(50), 4, noise_seed=11)
    assert np.array_equal(a.y, b.y)
    clean = EllipticFEM().point_values(default_truth(50), 4, [0.25, 0.75])
    c = synthesize_data(default_truth(50), 4, noise_seed=11, xi_std=1e-14)
    assert np.allclose(c.y, clean, rtol=0, atol=1e-12)


def test_synthesize_constant_coefficient():
    obs = synthesize_data(np.zeros(50), data_level=10, noise_seed=5)
    noise = 0.25 * np.random.default_rng(5).standard_normal(2)
    assert np.allclose(obs.y - noise, [26.0417, 36.4583], atol=1e-4)


def test_observation_round_trip():
    obs = synthesize_data(default_truth(50), 3)
    back = ObservationSetup.from_dict(obs.to_dict())
    assert np.array_equal(back.y, obs.y) and back.obs_points == obs.obs_points
    with pytest.raises(ValueError):
        ObservationSetup(np.array([1.0]), 0.25)
    with pytest.raises(ValueError):
        ObservationSetup(np.array([1.0, 2.0]), 0.0)


def test_flat_likelihood_accepts_everything(monkeypatch):
    prob = problem()
    monkeypatch.setattr(prob, "log_density", lambda level, s: np.zeros(len(np.atleast_2d(s))))
    s = prob.sample_prior(200, np.random.default_rng(0))
    prop = prob.propose(s, np.random.default_rng(1))
    new, _ = prob.mutate(1, s, np.random.default_rng(1))
    assert np.array_equal(new, prop)


def test_null_proposal_keeps_state(monkeypatch):
    prob = problem()
    monkeypatch.setattr(prob, "propose", lambda s, rng: s.copy())
    s = prob.sample_prior(50, np.random.default_rng(0))
    new, logd = prob.mutate(1, s, np.random.default_rng(2))
    assert np.array_equal(new, s)
    assert np.array_equal(logd, prob.log_density(1, s))


@settings(max_examples=100, deadline=None)
@given(v=st.floats(-50.0, 50.0))
def test_reflect_into_box(v):
    r = float(reflect(np.array(v)))
    assert -1.0 <= r <= 1.0
    if -1.0 <= v <= 1.0:
        assert r == pytest.approx(v, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mix=st.floats(0.0, 1.0), step=st.floats(0.01, 5.0))
def test_mutation_stays_in_box(seed, mix, step):
    prob = problem(mutation=MutationConfig(mix, step, 5))
    rng = np.random.default_rng(seed)
    s = mutate_ensemble(prob, 0, prob.sample_prior(20, rng), rng, sweeps=3)
    assert np.all(np.abs(s) <= 1.0)


def test_mutation_config_validation():
    with pytest.raises(ValueError):
        MutationConfig(proposal_mix=1.5)
    with pytest.raises(ValueError):
        MutationConfig(rw_step=0.0)
    with pytest.raises(ValueError):
        problem(mutation=MutationConfig(coords_per_step=51))


def test_fixed_fem_level_gives_unit_potentials():
    prob = problem(fixed_fem_level=1)
    u = prob.sample_prior(10, np.random.default_rng(0))
    assert np.all(log_potential(prob, 2, u) == 0.0)


def marginal_tv(K, level=2, chains=1000, burn=100, sweeps=100, bins=20):
    fem = EllipticFEM(CoefficientField(K=K))
    obs = synthesize_data(default_truth(K), 6, noise_seed=0, fem=fem)
    prob = EllipticInverseProblem(obs, fem, num_levels_available=4,
                                  mutation=MutationConfig(coords_per_step=1))
    # quadrature marginal of u_1 on a midpoint grid
    m = 400 if K > 1 else 20000
    g = (np.arange(m) + 0.5) / m * 2 - 1
    if K == 1:
        dens = np.exp(prob.log_density(level, g[:, None]))
        marg = dens
    else:
        U1, U2 = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([U1.ravel(), U2.ravel()])
        dens = np.exp(prob.log_density(level, pts)).reshape(m, m)
        marg = dens.sum(axis=1)
    edges = np.linspace(-1, 1, bins + 1)
    p = np.array([marg[(g >= a) & (g < b)].sum() for a, b in zip(edges, edges[1:])])
    p /= p.sum()

    rng = np.random.default_rng(42)
    s = prob.sample_prior(chains, rng)
    s, logd = mutate_ensemble(prob, level, s, rng, burn, return_log_density=True)
    draws = []
    for _ in range(sweeps):
        s, logd = prob.mutate(level, s, rng, logd)
        draws.append(s[:, 0].copy())
    hist = np.histogram(np.concatenate(draws), bins=edges)[0]
    return 0.5 * np.abs(hist / hist.sum() - p).sum()


def test_marginal_one_coordinate():
    assert marginal_tv(1) <= 0.03


def test_marginal_two_coordinates():
    # the (u_1, u_2) posterior is a thin ridge; single-site moves need a long burn-in
    assert marginal_tv(2, chains=500, burn=1000, sweeps=300) <= 0.03
