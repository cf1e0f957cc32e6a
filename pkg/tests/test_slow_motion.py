import numpy as np
import pytest

from fastslow.coefficients import make_field
from fastslow.drivers import DriverPath, gen_driver
from fastslow.errors import BoxExitError, ConfigurationError
from fastslow.grid import TimeGrid
from fastslow.lift import lift_continuous, lift_discrete
from fastslow.norms import modified_holder, path_window
from fastslow.slow_motion import (reconstruction_selftest, simulate_continuous, simulate_discrete,
                                  simulate_discrete_batch, write_path_csv)

from conftest import MA1, TRIG


def loop_recurrence(field, xi, N, x0):
    x = np.array([x0], dtype=float)
    out = [x.copy()]
    for k in range(len(xi)):
        x = x + field.sigma(x) @ xi[k] / np.sqrt(N) + field.b(x) / N
        out.append(x.copy())
    return np.array(out)


def test_recurrence_matches_loop_and_residual():
    field = make_field("trig1d", **TRIG)
    drv = gen_driver("ma1", 0, 512, 1.0, MA1)
    slow = simulate_discrete(field, drv, 0.25)
    assert slow.states[0, 0] == 0.25
    np.testing.assert_allclose(slow.states, loop_recurrence(field, drv.samples, 512, 0.25), atol=1e-14, rtol=0)
    assert slow.recurrence_residual(field, drv) <= 1e-12


def test_identity_sigma_gives_lift():
    drv = gen_driver("ma1", 0, 256, 1.0, {"D": 2, "theta": 0.5})
    field = make_field("constant", sigma=np.eye(2))
    slow = simulate_discrete(field, drv, [1.0, -1.0])
    np.testing.assert_allclose(slow.states - [1.0, -1.0], lift_discrete(drv).prefix_S, atol=1e-13)


def test_zero_sigma_constant_drift_and_shift():
    N = 100
    drv = gen_driver("ma1", 0, N, 1.0, MA1)
    f = make_field("constant", sigma=[[0.0]], b=[0.3])
    X = simulate_discrete(f, drv, 0.0).states[:, 0]
    np.testing.assert_allclose(X, 0.3 * np.arange(N + 1) / N, atol=1e-14)
    g = make_field("constant", sigma=[[0.0]], b=[0.3 + 0.5])
    Y = simulate_discrete(g, drv, 0.0).states[:, 0]
    np.testing.assert_allclose(Y - X, 0.5 * np.arange(N + 1) / N, atol=1e-14)


def test_discrete_constant_on_cells():
    field = make_field("trig1d", **TRIG)
    slow = simulate_discrete(field, gen_driver("ma1", 0, 64, 1.0, MA1), 0.0)
    assert np.all(slow.at(np.array([10.0, 10.3, 10.99]) / 64) == slow.states[10])
    assert np.isfinite(modified_holder(path_window(slow.states, 64), 0.45, 64).value)


def test_box_exit_reports_step():
    field = make_field("constant", sigma=[[1.0]], b=[0.0], box=(-0.5, 0.5))
    drv = DriverPath(TimeGrid(16), np.full((16, 1), 1.0), "test", [0.0])
    with pytest.raises(BoxExitError) as info:
        simulate_discrete(field, drv, 0.0)
    assert info.value.step == 3


def test_batch_equals_single():
    field = make_field("trig1d", **TRIG)
    drvs = [gen_driver("ma1", 0, 128, 1.0, MA1, replicate=r) for r in range(3)]
    batch = simulate_discrete_batch(field, np.stack([d.samples for d in drvs]), 128, 0.0)
    for r, d in enumerate(drvs):
        np.testing.assert_array_equal(batch[r], simulate_discrete(field, d, 0.0).states)


def test_continuous_zero_driver_linear_flow():
    # b(x) = e + f x via the linear family; exact flow x(t) = (x0 + e/f) e^{ft} - e/f.
    N, M = 16, 8
    e, f = 0.3, -0.7
    field = make_field("linear", sigma0=[[0.5]], sigma_slope=[[[0.0]]], b0=[e], b_slope=[[f]])
    drv = DriverPath(TimeGrid(N, 1.0, M), np.zeros((N * M + 1, 1)), "zero", [0.0], True)
    slow = simulate_continuous(field, drv, 1.0)
    t = np.arange(N * M + 1) / (N * M)
    exact = (1.0 + e / f) * np.exp(f * t) - e / f
    assert np.max(np.abs(slow.fine_states[:, 0] - exact)) < 1e-9


def test_continuous_constant_sigma_matches_lift():
    N, M = 32, 16
    drv = gen_driver("ma1", 0, N, 1.0, MA1, continuous=True, substeps=M)
    field = make_field("constant", sigma=[[0.7]], b=[0.0])
    slow = simulate_continuous(field, drv, 0.0)
    np.testing.assert_allclose(slow.fine_states[:, 0], 0.7 * lift_continuous(drv).prefix_S[:, 0], atol=1e-12)


def test_continuous_order_four():
    N = 8
    field = make_field("trig1d", amplitude=0.5, offset=0.3, drift_amplitude=0.2)
    base = gen_driver("ma1", 2, N, 1.0, MA1)
    ext = np.vstack([base.samples, base.samples[-1:]])
    finals = {}
    for M in (8, 16, 32, 64):
        drv = base.to_continuous(M)
        # Same interpolant for every M; only the integrator mesh changes.
        finals[M] = simulate_continuous(field, drv, 0.0).states[-1, 0]
    d1 = abs(finals[8] - finals[64])
    d2 = abs(finals[16] - finals[64])
    assert 8 < d1 / d2 < 24
    assert ext.shape[0] == N + 1


def test_continuous_mesh_guard():
    field = make_field("constant", sigma=[[1.0]])
    drv = DriverPath(TimeGrid(4, 1.0, 1), np.full((5, 1), 100.0), "big", [0.0], True)
    with pytest.raises(ConfigurationError):
        simulate_continuous(field, drv, 0.0)


def test_reconstruction_selftest():
    field = make_field("trig1d", **TRIG)
    drv = gen_driver("ma1", 0, 1024, 1.0, MA1)
    slow = simulate_discrete(field, drv, 0.0)
    rep = reconstruction_selftest(slow, lift_discrete(drv), field, 100, 0)
    assert rep.satisfied and rep.inequality_id == "recon_2_11"


def test_write_path_csv(tmp_path):
    field = make_field("trig1d", **TRIG)
    slow = simulate_discrete(field, gen_driver("ma1", 0, 16, 1.0, MA1), 0.0)
    write_path_csv(slow, tmp_path / "p.csv")
    data = np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 2], slow.states[:, 0])
