"""The slow motion X_N: exact discrete recurrence and the driven ODE.

Both simulators are vectorized over a batch of replicates (leading axis),
which is how the experiments run many paths at once; the single-path
functions are thin wrappers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BoxExitError, ConfigurationError, EvaluationError
from .grid import TimeGrid

__all__ = [
    "SlowPath",
    "simulate_discrete",
    "simulate_discrete_batch",
    "simulate_continuous",
    "simulate_continuous_batch",
    "reconstruction_selftest",
    "write_path_csv",
]


@dataclass
class SlowPath:
    """X_N on the grid k/N; continuous runs also keep the fine-mesh states."""

    grid: TimeGrid
    states: np.ndarray
    x0: np.ndarray
    mode: str
    fine_states: np.ndarray = None

    @property
    def mesh_states(self):
        return self.fine_states if self.mode == "continuous" else self.states

    @property
    def mesh_resolution(self):
        return self.grid.N * (self.grid.substeps if self.mode == "continuous" else 1)

    def at(self, t):
        """X_N(t) = X_N([tN]/N) on the coarse grid."""
        return self.states[self.grid.index(t)]

    def recurrence_residual(self, field, driver):
        """Max of |X(k+1) - X(k) - N^-1/2 sigma xi(k) - N^-1 b| / (1 + |X(k+1)|)."""
        X = self.states
        N = self.grid.N
        step = np.einsum("kij,kj->ki", field.sigma(X[:-1]), driver.samples) / np.sqrt(N) + field.b(X[:-1]) / N
        err = np.linalg.norm(X[1:] - X[:-1] - step, axis=-1)
        return float(np.max(err / (1 + np.linalg.norm(X[1:], axis=-1))))


def _x0_batch(field, x0, R):
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        x0 = x0[None]
    x0 = np.broadcast_to(x0, (R, field.dim_slow)).copy()
    field.sigma(x0)  # box and shape check
    return x0


def _step_error(exc, k):
    if isinstance(exc, BoxExitError):
        return BoxExitError(f"run aborted at step {k}: {exc}", step=k)
    return EvaluationError(f"run aborted at step {k}: {exc}")


def simulate_discrete_batch(field, samples, N, x0):
    """Recurrence for a batch of drivers ``samples`` of shape (R, n, D); returns (R, n + 1, d)."""
    xi = np.asarray(samples, dtype=float)
    R, n, D = xi.shape
    if D != field.dim_noise:
        raise ConfigurationError(f"driver dimension {D} != noise dimension {field.dim_noise}")
    X = np.empty((R, n + 1, field.dim_slow))
    X[:, 0] = _x0_batch(field, x0, R)
    a, c = 1.0 / np.sqrt(N), 1.0 / N
    x = X[:, 0]
    for k in range(n):
        try:
            x = x + a * np.einsum("rij,rj->ri", field.sigma(x), xi[:, k]) + c * field.b(x)
            field._check(x)
        except EvaluationError as exc:
            raise _step_error(exc, k + 1) from exc
        X[:, k + 1] = x
    return X


def simulate_discrete(field, driver, x0):
    """X_N((k+1)/N) = X_N(k/N) + N^-1/2 sigma(X) xi(k) + N^-1 b(X), iterated to [TN]."""
    if driver.continuous:
        raise ConfigurationError("simulate_discrete needs a discrete driver")
    X = simulate_discrete_batch(field, driver.samples[None], driver.grid.N, x0)[0]
    return SlowPath(driver.grid.with_substeps(1), X, X[0].copy(), "discrete")


def simulate_continuous_batch(field, samples, N, substeps, x0, max_step_size=0.5):
    """RK4 for dX = sqrt(N) sigma(X) xi(tN) dt + b(X) dt with piecewise-linear xi.

    ``samples`` has shape (R, n_fine + 1, D): the driver at the fine mesh
    points. The midpoint stage uses the interpolant's exact midpoint value.
    """
    xi = np.asarray(samples, dtype=float)
    R, m1, D = xi.shape
    if D != field.dim_noise:
        raise ConfigurationError(f"driver dimension {D} != noise dimension {field.dim_noise}")
    dt = 1.0 / (N * substeps)
    rootN = np.sqrt(N)
    size = rootN * dt * float(np.max(np.abs(xi))) * max(field.sup_norms["sigma"], 1.0)
    if size > max_step_size:
        raise ConfigurationError(f"fine mesh too coarse: sqrt(N) dt |xi| ||sigma|| = {size:.3g} > {max_step_size}")
    X = np.empty((R, m1, field.dim_slow))
    X[:, 0] = _x0_batch(field, x0, R)

    def rhs(x, e):
        return rootN * np.einsum("rij,rj->ri", field.sigma(x), e) + field.b(x)

    x = X[:, 0]
    for m in range(m1 - 1):
        e0, e1 = xi[:, m], xi[:, m + 1]
        em = 0.5 * (e0 + e1)
        try:
            k1 = rhs(x, e0)
            k2 = rhs(x + 0.5 * dt * k1, em)
            k3 = rhs(x + 0.5 * dt * k2, em)
            k4 = rhs(x + dt * k3, e1)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            field._check(x)
        except EvaluationError as exc:
            raise _step_error(exc, m + 1) from exc
        X[:, m + 1] = x
    return X


def simulate_continuous(field, driver, x0, substeps=None):
    """Driven ODE on the driver's fine mesh; keeps fine and coarse states."""
    if not driver.continuous:
        raise ConfigurationError("simulate_continuous needs a continuous (fine-sampled) driver")
    M = driver.grid.substeps
    if substeps is not None and int(substeps) != M:
        raise ConfigurationError(f"substeps={substeps} does not match the driver mesh ({M})")
    fine = simulate_continuous_batch(field, driver.samples[None], driver.grid.N, M, x0)[0]
    return SlowPath(driver.grid, fine[::M].copy(), fine[0].copy(), "continuous", fine)


def reconstruction_selftest(slow, lift, field, n_windows=100, seed=0):
    """Check X_N(s,t) = sum of discrete germs over the level-n_N dyadic partition.

    Draws ``n_windows`` random windows and returns a report whose lhs is the
    largest residual and rhs the tolerance 1e-12 (1 + max |X|).
    """
    from .sewing import BoundReport, dyadic_sums, reconstruction_level

    if slow.mode != "discrete":
        raise ConfigurationError("the reconstruction identity is a discrete-mode statement")
    rng = np.random.default_rng(seed)
    T = slow.grid.horizon
    worst, where = 0.0, None
    X = slow.states
    for _ in range(n_windows):
        s, t = np.sort(rng.uniform(0.0, T, size=2))
        n = reconstruction_level(s, t, slow.grid.N)
        total = dyadic_sums(field, slow, lift, s, t, n, "discrete")[-1]
        r = float(np.linalg.norm(X[slow.grid.index(t)] - X[slow.grid.index(s)] - total))
        if r > worst or where is None:
            worst, where = max(worst, r), (float(s), float(t), n)
    scale = 1.0 + float(np.max(np.abs(X)))
    return BoundReport.check("recon_2_11", worst, 1e-12 * scale, n_windows=n_windows, seed=seed,
                             worst_window=where)


def write_path_csv(path, file, fine=False):
    """Dump states as CSV columns k, t_k, X_1..X_d (fine mesh if ``fine``)."""
    states = path.mesh_states if fine else path.states
    res = path.mesh_resolution if fine else path.grid.N
    k = np.arange(len(states))
    data = np.column_stack([k, k / res, states])
    header = ["k", "t_k"] + [f"X_{i + 1}" for i in range(states.shape[1])]
    fmt = ["%d"] + ["%.17g"] * (data.shape[1] - 1)
    np.savetxt(file, data, delimiter=",", header=",".join(header), comments="", fmt=fmt)
