import numpy as np
import pytest

from fastslow.coefficients import make_field
from fastslow.diffusion import psi_xi_step, solve_sde, solve_sde_batch
from fastslow.drivers import gen_brownian, gen_coupled
from fastslow.lift import lift_brownian

from conftest import MA1, TRIG


def test_constant_sigma_exact():
    nz = gen_coupled(0, 128, 1.0, "ma1", MA1, 16)
    field = make_field("constant", sigma=[[0.7]], b=[0.0])
    for scheme in ("milstein", "euler"):
        xi = solve_sde(field, nz, scheme=scheme, x0=0.2)
        assert xi.states[0, 0] == 0.2
        W = nz.brownian_path()
        assert np.max(np.abs(xi.states - 0.2 - 0.7 * W)) < 1e-12


def test_gamma_drift_deterministic():
    nz = gen_coupled(0, 64, 1.0, "ma1", MA1, 8)
    nz.brownian_increments = np.zeros_like(nz.brownian_increments)
    field = make_field("linear", sigma0=[[0.0]], sigma_slope=[[[1.0]]], box=(-100, 100))
    g = 0.4
    euler = solve_sde(field, nz, gamma=[[g]], x0=1.0, scheme="euler")
    assert euler.states[-1, 0] == pytest.approx(np.exp(g), rel=2e-3)
    mil = solve_sde(field, nz, gamma=[[g]], x0=1.0, scheme="milstein", macro=1)
    assert mil.states[-1, 0] == pytest.approx(np.exp(g), rel=2e-3)


def test_geometric_strong_orders():
    # sigma(x) = x, b = 0, Gamma = 0: exact x0 exp(W - t/2).
    field = make_field("linear", sigma0=[[0.0]], sigma_slope=[[[1.0]]], box=(-1e3, 1e3))
    R, N, M = 500, 1, 256
    noises = [gen_coupled(5, N, 1.0, "iid_gaussian", {"D": 1}, M, replicate=r) for r in range(R)]
    dW = np.stack([nz.brownian_increments for nz in noises])
    lifts = [lift_brownian(nz, quadratic_variation="exact") for nz in noises]
    W = dW.sum(axis=1)[:, 0]
    exact = np.exp(W - 0.5)
    errs = {"euler": [], "milstein": []}
    steps = (4, 16, 64)
    for k in steps:
        coarse = dW.reshape(R, M // k, k, 1).sum(axis=2)
        # Iterated integrals over coarse cells come from the fine-mesh lift.
        S = np.stack([L.prefix_S[::k] for L in lifts])
        A = np.stack([L.prefix_A[::k] for L in lifts])
        e = solve_sde_batch(field, coarse, np.zeros((1, 1)), 1.0, "euler", resolution=M // k)
        m = solve_sde_batch(field, coarse, np.zeros((1, 1)), 1.0, "milstein", S, A, 1, M // k)
        errs["euler"].append(np.mean(np.abs(e[:, -1, 0] - exact)))
        errs["milstein"].append(np.mean(np.abs(m[:, -1, 0] - exact)))
    h = np.log(np.array([1 / (M // k) for k in steps]))
    slope_e = np.polyfit(h, np.log(errs["euler"]), 1)[0]
    slope_m = np.polyfit(h, np.log(errs["milstein"]), 1)[0]
    assert 0.3 < slope_e < 0.75
    assert 0.8 < slope_m < 1.3


def test_euler_milstein_agree_smooth():
    field = make_field("trig1d", **TRIG)
    nz = gen_coupled(1, 64, 1.0, "ma1", MA1, 64)
    a = solve_sde(field, nz, scheme="euler").states
    b = solve_sde(field, nz, scheme="milstein", macro=1).states
    assert np.max(np.abs(a - b)) < 0.05


def test_psi_xi_step_matches_milstein():
    field = make_field("trig1d", **TRIG)
    nz = gen_coupled(2, 32, 1.0, "ma1", MA1, 8)
    lift = lift_brownian(nz, nz.gamma)
    xi = solve_sde(field, nz, x0=0.1, lift=lift)
    x1 = xi.states[0] + psi_xi_step(field, lift, xi.states[0], 0.0, 1 / 32)
    np.testing.assert_allclose(x1, xi.states[8], atol=1e-14)
    # Zero Brownian path and zero Gamma reduce the germ to the drift.
    flat = gen_brownian(0, 32, 1.0, [[1.0]], 8)
    flat.brownian_increments[:] = 0
    L0 = lift_brownian(flat)
    np.testing.assert_allclose(psi_xi_step(field, L0, np.array([0.3]), 0.25, 0.5), field.b(np.array([0.3])) * 0.25)


def test_weak_marginal_constant_sigma():
    R = 2000
    Sig = np.array([[0.5, 0.2], [0.0, 0.3]])
    field = make_field("constant", sigma=Sig, b=[0.0, 0.0])
    ends = []
    for r in range(R):
        nz = gen_coupled(9, 8, 1.0, "ma1", {"D": 2, "theta": 0.5}, 2, replicate=r)
        ends.append(solve_sde(field, nz, scheme="euler", gamma=np.zeros((2, 2))).states[-1])
    ends = np.array(ends)
    target = Sig @ (2.25 * np.eye(2)) @ Sig.T
    c = np.cov(ends.T)
    se = np.sqrt((target ** 2 + np.outer(np.diag(target), np.diag(target))) / R)
    assert np.all(np.abs(c - target) < 4 * se)
    assert np.all(np.abs(ends.mean(0)) < 4 * np.sqrt(np.diag(target) / R))
