"""Level-2 lifts stored as prefixes and rebuilt on windows by the Chen relation.

A lift keeps S(0, t_m) and A(0, t_m) = 𝕊(0, t_m) on its mesh t_m. Any window
follows from

    S(s, t) = S(0, t) - S(0, s)
    𝕊(s, t) = A(0, t) - A(0, s) - S(0, s) ⊗ S(s, t)

which is exact for sums and integrals alike. Times are floored onto the
mesh: the coarse mesh k/N for discrete lifts, the fine mesh for Brownian
and continuous ones.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, RangeError
from .grid import TimeGrid, floor_index

__all__ = [
    "Level2Path",
    "lift_discrete",
    "lift_brownian",
    "lift_continuous",
    "eval_increment",
    "eval_iterated",
    "chen_residual",
    "write_lift_csv",
    "coarsen",
]


@dataclass
class Level2Path:
    """Prefix data (S(0, t_m), 𝕊(0, t_m)) on a uniform mesh of ``resolution`` points per unit time."""

    grid: TimeGrid
    prefix_S: np.ndarray
    prefix_A: np.ndarray
    kind: str
    resolution: int
    gamma: np.ndarray = None

    def __post_init__(self):
        if len(self.prefix_S) != len(self.prefix_A):
            raise ConfigurationError("prefix arrays must have equal length")
        if np.any(self.prefix_S[0] != 0) or np.any(self.prefix_A[0] != 0):
            raise ConfigurationError("prefixes must start at zero")

    @property
    def dim(self):
        return self.prefix_S.shape[1]

    @property
    def n_points(self):
        return len(self.prefix_S)

    @property
    def times(self):
        return np.arange(self.n_points) / self.resolution

    @property
    def scale(self):
        return float(np.max(np.abs(self.prefix_A)))

    def index(self, t):
        """Mesh index of time(s) ``t`` after range checking."""
        t = np.asarray(t, dtype=float)
        if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > self.grid.T + 1e-12):
            raise RangeError(f"time outside [0, {self.grid.T}]: {t}")
        return np.minimum(floor_index(t, self.resolution), self.n_points - 1)

    def _order(self, s, t):
        i, j = self.index(s), self.index(t)
        if np.any(np.asarray(s, dtype=float) > np.asarray(t, dtype=float)):
            raise RangeError("windows need s <= t")
        return i, j

    def increment_idx(self, i, j):
        """S on the mesh window [t_i, t_j]; ``i``, ``j`` may be arrays."""
        return self.prefix_S[j] - self.prefix_S[i]

    def iterated_idx(self, i, j):
        """𝕊 on the mesh window [t_i, t_j] by Chen reconstruction."""
        S_i = self.prefix_S[i]
        return self.prefix_A[j] - self.prefix_A[i] - S_i[..., :, None] * (self.prefix_S[j] - S_i)[..., None, :]

    def increment(self, s, t):
        return self.increment_idx(*self._order(s, t))

    def iterated(self, s, t):
        return self.iterated_idx(*self._order(s, t))


def eval_increment(lift, s, t):
    """S(s, t) with both times floored onto the lift's mesh."""
    return lift.increment(s, t)


def eval_iterated(lift, s, t):
    """𝕊(s, t) = A(t) - A(s) - S(0, s) ⊗ S(s, t)."""
    return lift.iterated(s, t)


def chen_residual(lift, s, u, t):
    """𝕊(s,t) - 𝕊(s,u) - 𝕊(u,t) - S(s,u) ⊗ S(u,t); zero up to rounding."""
    i, k = lift._order(s, u)
    _, j = lift._order(u, t)
    a = lift.iterated_idx(i, j) - lift.iterated_idx(i, k) - lift.iterated_idx(k, j)
    left, right = lift.increment_idx(i, k), lift.increment_idx(k, j)
    return a - left[..., :, None] * right[..., None, :]


def _prefix(steps, cells=None, start=None):
    """Prefix sums S and A from per-cell increments ``steps`` and in-cell area ``cells``."""
    n, D = steps.shape
    S = np.zeros((n + 1, D))
    np.cumsum(steps, axis=0, out=S[1:])
    dA = S[:-1, :, None] * steps[:, None, :]
    if cells is not None:
        dA = dA + cells
    A = np.zeros((n + 1, D, D))
    np.cumsum(dA, axis=0, out=A[1:])
    return S, A


def lift_discrete(path):
    """Discrete lift: S_N(t) = N^{-1/2} sum_{k<[tN]} xi(k), 𝕊_N = N^{-1} sum_{k<l} xi(k) ⊗ xi(l)."""
    if path.continuous:
        raise ConfigurationError("lift_discrete needs a discrete driver; use lift_continuous")
    N = path.grid.N
    S, A = _prefix(path.samples / np.sqrt(N))
    return Level2Path(path.grid.with_substeps(1), S, A, "discrete", N)


def lift_continuous(path, N=None):
    """Integral lift of a piecewise-linear driver, exact on each linear cell.

    With xi = a + (u / h) d on a cell of fast-time length h, the cell
    contributes N^{-1/2} h (a + a + d) / 2 to S and
    N^{-1} h^2 (a⊗a/2 + a⊗d/3 + d⊗a/6 + d⊗d/8) to the in-cell part of 𝕊.
    """
    if not path.continuous:
        raise ConfigurationError("lift_continuous needs a continuous (fine-sampled) driver")
    if N is not None and int(N) != path.grid.N:
        raise ConfigurationError(f"N={N} does not match the driver grid N={path.grid.N}")
    N, M = path.grid.N, path.grid.substeps
    h = 1.0 / M
    x = path.samples
    a, d = x[:-1], x[1:] - x[:-1]
    steps = h * (a + 0.5 * d) / np.sqrt(N)
    outer = lambda p, q: p[:, :, None] * q[:, None, :]
    cells = (h * h / N) * (outer(a, a) / 2 + outer(a, d) / 3 + outer(d, a) / 6 + outer(d, d) / 8)
    S, A = _prefix(steps, cells)
    return Level2Path(path.grid, S, A, "continuous", N * M)


def lift_brownian(noise, gamma=None, quadratic_variation="empirical"):
    """Brownian lift: left-point Itô sums on the fine mesh plus (t - s) Gamma.

    ``quadratic_variation="exact"`` adds (ΔW ⊗ ΔW - cov Δτ) / 2 per fine
    step, which makes the symmetric part of every window equal
    (W ⊗ W - cov (t - s)) / 2 exactly while keeping the fine-mesh Itô
    sums for the antisymmetric (area) part.
    """
    dW = getattr(noise, "brownian_increments", None)
    if dW is None or len(dW) == 0:
        raise ConfigurationError("Brownian lift needs fine-grid Brownian increments")
    grid = noise.grid
    res = grid.N * grid.substeps
    if len(dW) != grid.n_fine:
        raise ConfigurationError(f"expected {grid.n_fine} fine increments, got {len(dW)}")
    D = dW.shape[1]
    gamma = np.zeros((D, D)) if gamma is None else np.atleast_2d(np.asarray(gamma, dtype=float))
    if gamma.shape != (D, D) or not np.all(np.isfinite(gamma)):
        raise ConfigurationError(f"gamma must be a finite {D}x{D} matrix")
    dt = 1.0 / res
    cells = np.broadcast_to(gamma * dt, (len(dW), D, D)).copy()
    if quadratic_variation == "exact":
        cov = np.atleast_2d(np.asarray(noise.cov, dtype=float))
        cells += 0.5 * (dW[:, :, None] * dW[:, None, :] - cov * dt)
    elif quadratic_variation != "empirical":
        raise ConfigurationError("quadratic_variation must be 'empirical' or 'exact'")
    S, A = _prefix(dW, cells)
    return Level2Path(grid, S, A, "brownian", res, gamma)


def write_lift_csv(lift, path):
    """Dump the prefix data as CSV columns m, t_m, S_1..S_D, A_11..A_DD."""
    D = lift.dim
    m = np.arange(lift.n_points)
    cols = [m, lift.times, lift.prefix_S, lift.prefix_A.reshape(lift.n_points, D * D)]
    data = np.column_stack(cols)
    header = ["m", "t_m"] + [f"S_{i + 1}" for i in range(D)] + \
        [f"A_{i + 1}{j + 1}" for i in range(D) for j in range(D)]
    fmt = ["%d"] + ["%.17g"] * (data.shape[1] - 1)
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=fmt)


def coarsen(lift, factor):
    """The same lift read only at every ``factor``-th mesh point.

    Prefixes at a subset of mesh points are still prefixes, so windows
    between retained points are reproduced exactly.
    """
    factor = int(factor)
    if factor < 1 or lift.resolution % factor:
        raise ConfigurationError(f"cannot coarsen resolution {lift.resolution} by {factor}")
    return Level2Path(lift.grid.with_substeps(max(1, lift.grid.substeps // factor)),
                      lift.prefix_S[::factor].copy(), lift.prefix_A[::factor].copy(), lift.kind,
                      lift.resolution // factor, lift.gamma)
