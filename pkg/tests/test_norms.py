import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastslow.drivers import gen_driver
from fastslow.errors import ConfigurationError, ContractViolation
from fastslow.lift import lift_discrete
from fastslow.norms import (G_MAX, difference_window, function_window, holder, iterated_window,
                            modified_holder, norm_comparison, p_variation, p_variation_values,
                            path_window, windowed_holder)

paths = st.integers(0, 2 ** 31).map(lambda s: np.random.default_rng(s))


def brute_holder(x, res, beta, N=None):
    best = 0.0
    for i, j in itertools.combinations(range(len(x)), 2):
        den = ((j - i) / res) ** beta
        if N is not None:
            den = max(den, N ** (-beta))
        best = max(best, float(np.linalg.norm(np.atleast_1d(x[j] - x[i]))) / den)
    return best


def brute_pvar(x, p):
    n = len(x)
    best = 0.0
    for mask in range(1 << (n - 2)):
        pts = [0] + [k + 1 for k in range(n - 2) if mask >> k & 1] + [n - 1]
        best = max(best, sum(abs(x[b] - x[a]) ** p for a, b in zip(pts, pts[1:])))
    return best ** (1 / p)


def test_linear_path_holder():
    c, T = 2.5, 1.0
    x = c * np.linspace(0, T, 101)
    r = holder(path_window(x, 100), 0.4)
    assert r.value == pytest.approx(abs(c) * T ** 0.6, rel=1e-12)
    assert r.witness == (0.0, 1.0)


def test_zero_path():
    V = path_window(np.zeros(17), 16)
    assert holder(V, 0.4).value == 0
    assert p_variation(V, 2.0).value == 0


def test_random_16_point_exhaustive():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(16)
    assert holder(path_window(x, 15), 0.45).value == brute_holder(x, 15, 0.45)
    assert modified_holder(path_window(x, 15), 0.45, 4).value == brute_holder(x, 15, 0.45, 4)


def test_witness_reproduces_value():
    rng = np.random.default_rng(3)
    x = np.cumsum(rng.standard_normal((200, 2)), axis=0)
    r = holder(path_window(x, 199), 0.4)
    s, t = r.witness
    i, j = round(s * 199), round(t * 199)
    assert np.linalg.norm(x[j] - x[i]) / (t - s) ** 0.4 == pytest.approx(r.value, rel=1e-12)


def test_single_jump_modified():
    N = 64
    x = np.zeros(N + 1)
    x[33:] = 1.7
    r = modified_holder(path_window(x, N), 0.4, N, interval=(32 / N, 33 / N))
    assert r.value == pytest.approx(1.7 * N ** 0.4, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(paths, st.floats(0.1, 0.9), st.integers(2, 40))
def test_modified_below_plain_and_limit(rng, beta, n):
    x = rng.standard_normal(n)
    V = path_window(x, n - 1)
    plain = holder(V, beta).value
    assert modified_holder(V, beta, 3).value <= plain
    assert modified_holder(V, beta, 1e9).value == pytest.approx(plain, rel=1e-12)


def test_windowed_examples():
    rng = np.random.default_rng(5)
    x = np.cumsum(rng.standard_normal(257))
    V = path_window(x, 256)
    assert windowed_holder(V, 0.4, 2.0).value == holder(V, 0.4).value
    vals = [windowed_holder(V, 0.4, h).value for h in (1 / 256, 4 / 256, 32 / 256, 0.5)]
    assert vals == sorted(vals)
    for h in (2 / 256, 16 / 256, 0.25):
        assert windowed_holder(V, 0.4, h).value <= 2 * windowed_holder(V, 0.4, h / 2).value * (1 + 1e-12)


def test_windowed_sub_mesh_linear():
    x = 3.0 * np.linspace(0, 1, 11)
    r = windowed_holder(path_window(x, 10), 0.4, 0.01)
    assert r.value == pytest.approx(3.0 * 0.01 ** 0.6, rel=1e-12)
    with pytest.raises(ConfigurationError):
        windowed_holder(function_window(lambda i, j: x[j] - x[i], 11, 10), 0.4, 0.01)


def test_pvar_examples():
    assert p_variation_values(np.array([0.0, 0.3, 0.7, 2.0]), 2.0)[0] == pytest.approx(2.0)
    assert p_variation_values(np.array([0.0, 1.0, 0.0]), 2.0)[0] == pytest.approx(np.sqrt(2))


def test_pvar_oracle_many():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 13))
        x = rng.standard_normal(n)
        p = float(rng.uniform(1.0, 3.0))
        dp, _ = p_variation_values(x, p)
        assert dp == pytest.approx(brute_pvar(x, p), rel=1e-12)


def test_pvar_requires_additive():
    L = lift_discrete(gen_driver("ma1", 0, 32, 1.0, {"D": 1, "theta": 0.5}))
    with pytest.raises(ContractViolation):
        p_variation(iterated_window(L), 2.0)


@settings(max_examples=30, deadline=None)
@given(paths, st.integers(11, 40), st.floats(-3, 3))
def test_seminorm_properties(rng, n, c):
    x, y = rng.standard_normal(n), rng.standard_normal(n)
    res = n - 1
    V, U = path_window(x, res), path_window(y, res)
    VU = path_window(x + y, res)
    cV = path_window(c * x, res)
    for fn in (lambda W: holder(W, 0.4).value, lambda W: modified_holder(W, 0.4, 8).value,
               lambda W: windowed_holder(W, 0.4, 0.3).value, lambda W: p_variation(W, 2.5).value):
        assert fn(VU) <= (fn(V) + fn(U)) * (1 + 1e-12) + 1e-12
        assert fn(cV) == pytest.approx(abs(c) * fn(V), rel=1e-10, abs=1e-12)
    # interval monotonicity and single-pair lower bound
    assert holder(V, 0.4, (0.2, 0.6)).value <= holder(V, 0.4).value
    i, j = sorted(rng.choice(n, 2, replace=False))
    assert p_variation(V, 2.5).value >= abs(x[j] - x[i]) * (1 - 1e-12)
    # subadditivity over concatenation at a mesh point
    s = (res // 2) / res
    assert holder(V, 0.4).value <= (holder(V, 0.4, (0, s)).value + holder(V, 0.4, (s, 1)).value) * (1 + 1e-12)


def test_subsampling_recorded():
    x = np.cumsum(np.random.default_rng(0).standard_normal(2 * G_MAX + 1))
    r = holder(path_window(x, 2 * G_MAX), 0.4)
    assert r.stride == 2 and r.grid_size == G_MAX + 1


def test_difference_window():
    a = path_window(np.arange(5.0), 4)
    b = path_window(np.arange(5.0) * 2, 4)
    assert holder(difference_window(b, a), 0.5).value == holder(a, 0.5).value


def test_norm_comparison_examples():
    N = 64
    z = path_window(np.zeros(N + 1), N)
    nc = norm_comparison(z, 0.4, 0.45, 1.0, N, 2.5)
    assert nc.lhs == nc.rhs == 0 and nc.satisfied
    x = np.zeros(N + 1)
    x[20:] = 1.0
    nc = norm_comparison(path_window(x, N), 0.4, 0.45, 1.0, N, 2.5)
    assert nc.satisfied and nc.slack >= 0
    with pytest.raises(ConfigurationError):
        norm_comparison(z, 0.4, 0.45, 1.5, N, 2.5)


def test_norm_comparison_random_sweep():
    for r in range(1000):
        L = lift_discrete(gen_driver("ma1", 0, 64, 1.0, {"D": 1, "theta": 0.5}, replicate=r))
        nc = norm_comparison(path_window(L.prefix_S, 64), 0.4, 0.45, 1.0, 64, 2.6)
        assert nc.satisfied, nc
