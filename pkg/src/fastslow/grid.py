"""Uniform time grids k/N on [0, T]."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, RangeError

# Slack added before flooring t*N so that t = k/N computed in floating point
# maps to k and not k - 1.
_FLOOR_SLACK = 1e-9


def floor_index(t, resolution):
    """Return ``[t * resolution]`` robustly for times sitting on mesh points."""
    return np.floor(np.asarray(t, dtype=float) * resolution + _FLOOR_SLACK).astype(np.int64)


@dataclass(frozen=True)
class TimeGrid:
    """The coarse grid k/N, k = 0..[TN], with an optional fine sub-mesh.

    ``substeps`` fine cells subdivide every coarse cell, so the fine mesh
    has spacing ``1 / (N * substeps)``.
    """

    N: int
    T: float = 1.0
    substeps: int = 1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be a positive integer, got {self.N}")
        if not self.T > 0:
            raise ConfigurationError(f"T must be positive, got {self.T}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ConfigurationError(f"substeps must be a positive integer, got {self.substeps}")
        if self.n_steps < 1:
            raise ConfigurationError(f"grid has no steps: N={self.N}, T={self.T}")

    @property
    def n_steps(self):
        """Number of coarse cells, ``[TN]``."""
        return int(floor_index(self.T, self.N))

    @property
    def n_fine(self):
        return self.n_steps * self.substeps

    @property
    def dt(self):
        return 1.0 / self.N

    @property
    def fine_dt(self):
        return 1.0 / (self.N * self.substeps)

    @property
    def times(self):
        return np.arange(self.n_steps + 1) / self.N

    @property
    def fine_times(self):
        return np.arange(self.n_fine + 1) / (self.N * self.substeps)

    @property
    def horizon(self):
        """Last grid time ``[TN]/N`` (equals T when TN is an integer)."""
        return self.n_steps / self.N

    def index(self, t, fine=False):
        """Floor index of ``t`` on the coarse (or fine) mesh, range-checked."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.T + 1e-12):
            raise RangeError(f"time outside [0, {self.T}]: {t}")
        res = self.N * (self.substeps if fine else 1)
        top = self.n_fine if fine else self.n_steps
        return np.minimum(floor_index(t, res), top)

    def with_substeps(self, substeps):
        return TimeGrid(self.N, self.T, substeps)
