import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from fastslow.drivers import (batch_standard_errors, doubling_orbit, estimate_cov, estimate_gamma,
                              gen_brownian, gen_coupled, gen_driver, gen_gauss_map, gen_iid_gaussian,
                              gen_ma1, gen_markov_chain, make_observable, make_rng,
                              stationary_distribution)
from fastslow.errors import ConfigurationError

CHAIN = {"transition_matrix": [[0.75, 0.25], [0.25, 0.75]], "state_values": [1.0, -1.0]}


def test_iid_cross_covariance_and_shape():
    p = gen_iid_gaussian(0, 10 ** 6, 1.0, 2)
    x = p.samples
    assert x.shape == (10 ** 6, 2)
    lag1 = x[:-1].T @ x[1:] / (len(x) - 1)
    assert np.max(np.abs(lag1)) < 4 / np.sqrt(len(x))


def test_iid_zero_covariance_is_zero_path():
    assert np.all(gen_iid_gaussian(0, 100, 1.0, 2, np.zeros((2, 2))).samples == 0)


def test_iid_correlated_covariance_within_three_se():
    rho = 0.5
    x = gen_iid_gaussian(3, 200_000, 1.0, 2, [[1, rho], [rho, 1]]).samples
    c = np.cov(x.T)
    n = len(x)
    se = np.array([[np.sqrt(2 / n), np.sqrt((1 + rho ** 2) / n)], [np.sqrt((1 + rho ** 2) / n), np.sqrt(2 / n)]])
    assert np.all(np.abs(c - [[1, rho], [rho, 1]]) < 3 * se)


def test_ma1_theta_zero_is_iid():
    a = gen_ma1(5, 1000, 1.0, 1, 0.0).samples
    b = make_rng(5, 1000, 0, 0).standard_normal((1002, 1))[1:-1]
    np.testing.assert_array_equal(a, b)


def test_ma1_theta_bounds():
    gen_ma1(0, 10, 1.0, 1, -1 + 1e-9)
    with pytest.raises(ConfigurationError):
        gen_ma1(0, 10, 1.0, 1, 1.0)


def test_ma1_gamma_cov_and_lag_decay():
    p = gen_ma1(0, 10 ** 6, 1.0, 1, 0.5)
    est = estimate_gamma(p, 50, return_lags=True)
    se_g, se_c = batch_standard_errors(p, 50)
    assert abs(est.gamma[0, 0] - 0.5) <= 3 * se_g[0, 0]
    assert abs(estimate_cov(p, 50)[0, 0] - 2.25) <= 3 * se_c[0, 0]
    tail = est.per_lag[1:, 0, 0]
    assert np.all(np.abs(tail) < 5 / np.sqrt(10 ** 6))


def test_iid_gamma_near_zero():
    p = gen_iid_gaussian(1, 200_000, 1.0, 1)
    se_g, _ = batch_standard_errors(p, 20)
    assert abs(estimate_gamma(p, 20)[0, 0]) <= 3 * se_g[0, 0]
    assert estimate_cov(p, 20)[0, 0] == pytest.approx(1.0, abs=0.05)


def test_estimate_cov_symmetric():
    p = gen_ma1(2, 20_000, 1.0, 3, [0.2, -0.4, 0.6])
    c = estimate_cov(p, 10)
    assert np.array_equal(c, c.T)


def test_max_lag_limit():
    with pytest.raises(ConfigurationError):
        estimate_gamma(gen_ma1(0, 1000, 1.0, 1, 0.5), 11)


def test_doubling_orbit_stays_uniform_and_nonzero():
    x = doubling_orbit(make_rng(0), 100_000)
    assert np.all((x >= 0) & (x < 1))
    assert np.count_nonzero(x == 0) == 0
    assert stats.kstest(x, "uniform").pvalue > 1e-3


def test_doubling_cos_centering_and_orthogonality():
    p = gen_driver("doubling_map", 0, 10 ** 6, 1.0, {"observable": "cos"})
    x = p.samples[:, 0]
    assert abs(p.centered_mean[0]) < 1e-12
    assert p.centering_check(5)
    g = lambda u: np.cos(2 * np.pi * u)
    val, _ = integrate.quad(lambda u: g(u) * g((2 * u) % 1), 0, 1, limit=200)
    assert abs(val) < 1e-10
    assert abs(np.mean(x[:-1] * x[1:])) < 5 * np.std(x[:-1] * x[1:]) / np.sqrt(len(x))


def test_constant_observable_zero_path():
    for kind in ("doubling_map", "gauss_map"):
        p = gen_driver(kind, 0, 500, 1.0, {"observable": {"kind": "constant", "value": 3.0}})
        assert np.allclose(p.samples, 0, atol=1e-12)


def test_gauss_map_mean_and_invariance():
    p = gen_gauss_map(0, 100_000, 1.0, "identity")
    assert p.centered_mean[0] == pytest.approx(1 / np.log(2) - 1, abs=1e-10)
    orbit = p.samples[:, 0] + p.centered_mean[0]
    edges = np.linspace(0, 1, 21)
    counts, _ = np.histogram(orbit, edges)
    cdf = np.log2(1 + edges)
    expected = np.diff(cdf) * len(orbit)
    assert stats.chisquare(counts, expected).pvalue > 1e-3


def test_markov_chain_gamma_and_stationary():
    P = np.array(CHAIN["transition_matrix"])
    pi = stationary_distribution(P)
    assert np.max(np.abs(pi @ P - pi)) < 1e-12
    p = gen_markov_chain(0, 10 ** 6, 1.0, **CHAIN)
    se_g, _ = batch_standard_errors(p, 50)
    assert abs(estimate_gamma(p, 50)[0, 0] - 1.0) <= 3 * se_g[0, 0]


def test_symmetric_chain_half_is_iid():
    p = gen_markov_chain(1, 200_000, 1.0, [[0.5, 0.5], [0.5, 0.5]], [1.0, -1.0])
    se_g, _ = batch_standard_errors(p, 20)
    assert abs(estimate_gamma(p, 20)[0, 0]) <= 3 * se_g[0, 0]


def test_chain_rejects_reducible():
    with pytest.raises(ConfigurationError):
        gen_markov_chain(0, 10, 1.0, [[1.0, 0.0], [0.0, 1.0]], [1.0, -1.0])
    with pytest.raises(ConfigurationError):
        gen_markov_chain(0, 10, 1.0, [[0.0, 1.0], [1.0, 0.0]], [1.0, -1.0])


@pytest.mark.parametrize("kind,params", [
    ("iid_gaussian", {"D": 2}), ("ma1", {"D": 1, "theta": 0.5}), ("doubling_map", {}),
    ("gauss_map", {}), ("markov_chain", CHAIN)])
def test_stationarity_and_determinism(kind, params):
    p = gen_driver(kind, 7, 100_000, 1.0, params)
    q = gen_driver(kind, 7, 100_000, 1.0, params)
    assert np.array_equal(p.samples, q.samples)
    assert np.all(np.isfinite(p.samples))
    x = p.samples
    h = len(x) // 2
    a, b = x[:h], x[h:]
    ca, cb = (a * a).mean(0), (b * b).mean(0)
    se = np.sqrt((a ** 2).var(0) / h + (b ** 2).var(0) / h)
    # Dependence inflates the naive error; 5 joint errors with a factor 2 margin.
    assert np.all(np.abs(ca - cb) <= 10 * se)


def test_continuous_driver_interpolates():
    d = gen_driver("ma1", 0, 16, 1.0, {"D": 1, "theta": 0.5})
    c = gen_driver("ma1", 0, 16, 1.0, {"D": 1, "theta": 0.5}, continuous=True, substeps=4)
    assert c.samples.shape == (16 * 4 + 1, 1)
    np.testing.assert_array_equal(c.samples[:-1:4], d.samples)


def test_iid_coupling_exact_on_grid():
    nz = gen_coupled(0, 256, 1.0, "iid_gaussian", {"D": 2}, 8)
    W = nz.brownian_path()[::8]
    S = np.vstack([np.zeros(2), np.cumsum(nz.driver.samples, axis=0)]) / np.sqrt(256)
    assert np.max(np.abs(S - W)) < 1e-12


def test_ma1_coupling_telescoping_bound():
    N, theta = 512, 0.5
    nz = gen_coupled(3, N, 1.0, "ma1", {"D": 1, "theta": theta}, 8)
    W = nz.brownian_path()[::8]
    S = np.vstack([np.zeros(1), np.cumsum(nz.driver.samples, axis=0)]) / np.sqrt(N)
    eps = nz.base
    bound = abs(theta) * (abs(eps[0, 0]) + np.max(np.abs(eps[1:]))) / np.sqrt(N)
    assert np.max(np.abs(S - W)) <= bound + 1e-12
    np.testing.assert_allclose(S[1:, 0] - W[1:, 0], theta * (eps[0, 0] - eps[1:N + 1, 0]) / np.sqrt(N),
                               atol=1e-12)


def test_coupling_reproducible_and_noncouplable():
    a = gen_coupled(1, 64, 1.0, "ma1", {"theta": 0.3}, 4)
    b = gen_coupled(1, 64, 1.0, "ma1", {"theta": 0.3}, 4)
    assert np.array_equal(a.brownian_increments, b.brownian_increments)
    assert np.array_equal(a.driver.samples, b.driver.samples)
    with pytest.raises(ConfigurationError, match="weak"):
        gen_coupled(0, 64, 1.0, "doubling_map", {}, 4)


def test_independent_brownian_covariance():
    nz = gen_brownian(0, 1000, 1.0, [[2.25]], 4)
    inc = nz.brownian_increments
    assert inc.sum(axis=0).shape == (1,)
    assert np.var(inc) * 4000 == pytest.approx(2.25, rel=0.05)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 50), st.integers(0, 10))
def test_rng_keys_are_independent_streams(seed, N, rep):
    a = make_rng(seed, N, rep, 0).random(4)
    b = make_rng(seed, N, rep, 1).random(4)
    c = make_rng(seed, N, rep + 1, 0).random(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, make_rng(seed, N, rep, 0).random(4))


def test_observable_catalogue():
    g, desc = make_observable({"kind": "power", "exponent": 2.0})
    assert g(0.5) == pytest.approx(0.25)
    with pytest.raises(ConfigurationError):
        make_observable("bogus")
