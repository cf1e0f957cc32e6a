"""Stationary centered driving sequences, long-run covariance estimates, couplings.

Discrete drivers are sequences xi(0), ..., xi([TN]-1). Continuous drivers are
the piecewise-linear interpolant of a discrete sequence in fast time u = tN,
sampled on the mesh u_j = j / substeps, j = 0..[TN] * substeps.

Randomness is keyed by (seed, N, replicate) through ``SeedSequence`` spawn
keys feeding Philox, so replicates are independent and reproducible no
matter how they are scheduled.
"""

import bisect
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigurationError
from .grid import TimeGrid

__all__ = [
    "DriverPath",
    "CoupledNoise",
    "GammaEstimate",
    "make_rng",
    "make_observable",
    "gen_iid_gaussian",
    "gen_ma1",
    "gen_doubling_map",
    "gen_markov_chain",
    "gen_gauss_map",
    "gen_driver",
    "stationary_distribution",
    "estimate_gamma",
    "estimate_cov",
    "batch_standard_errors",
    "gen_coupled",
    "gen_brownian",
    "COUPLABLE",
]

COUPLABLE = ("iid_gaussian", "ma1")


def make_rng(seed, N=0, replicate=0, stream=0):
    """Counter-based generator for the job ``(seed, N, replicate)``.

    ``stream`` separates independent uses inside one job (driver noise,
    bridge refinement, initial conditions).
    """
    if seed is None or int(seed) < 0:
        raise ConfigurationError(f"seed must be a non-negative integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(N), int(replicate), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class DriverPath:
    """Samples of a centered driver on a :class:`TimeGrid`.

    Discrete: ``samples`` has shape ([TN], D). Continuous: shape
    ([TN] * substeps + 1, D), values of the interpolant at fast times
    j / substeps.
    """

    grid: TimeGrid
    samples: np.ndarray
    driver_kind: str
    centered_mean: np.ndarray
    continuous: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]
        expected = self.grid.n_fine + 1 if self.continuous else self.grid.n_steps
        if self.samples.shape[0] != expected:
            raise ConfigurationError(
                f"driver has {self.samples.shape[0]} samples, grid needs {expected}")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigurationError("driver samples must be finite")
        self.centered_mean = np.broadcast_to(
            np.asarray(self.centered_mean, dtype=float), (self.dim,)).copy()

    @property
    def dim(self):
        return self.samples.shape[1]

    @property
    def N(self):
        return self.grid.N

    def centering_check(self, n_se=5.0):
        """Each coordinate mean lies within ``n_se`` standard errors of zero."""
        x = self.samples
        n = len(x)
        sd = x.std(axis=0)
        return bool(np.all(np.abs(x.mean(axis=0)) <= n_se * sd / np.sqrt(n) + 1e-300))

    def to_continuous(self, substeps):
        """Piecewise-linear interpolant of a discrete driver, sampled ``substeps`` per unit.

        The last value xi([TN]) is unavailable, so the interpolant is held
        constant on the final cell; generators that know xi([TN]) build
        continuous paths directly instead.
        """
        if self.continuous:
            raise ConfigurationError("driver is already continuous")
        ext = np.vstack([self.samples, self.samples[-1:]])
        return DriverPath(self.grid.with_substeps(substeps), _interpolate(ext, substeps),
                          self.driver_kind, self.centered_mean, True, dict(self.params))


def _interpolate(values, substeps):
    """Values of the piecewise-linear interpolant of ``values`` at j / substeps."""
    n = len(values) - 1
    frac = np.arange(substeps) / substeps
    lo, hi = values[:-1], values[1:]
    fine = lo[:, None, :] + frac[None, :, None] * (hi - lo)[:, None, :]
    return np.vstack([fine.reshape(n * substeps, -1), values[-1:]])


def _finish(grid, seq, kind, mean, continuous, substeps, params):
    """Wrap a sequence of length [TN] + 1 as a discrete or continuous driver."""
    if continuous:
        g = grid.with_substeps(substeps)
        return DriverPath(g, _interpolate(seq, substeps), kind, mean, True, params)
    return DriverPath(grid, seq[:-1], kind, mean, False, params)


def _psd_factor(cov):
    """Symmetric square root of a PSD matrix, rejecting non-PSD input."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1] or not np.all(np.isfinite(cov)):
        raise ConfigurationError(f"covariance must be a finite square matrix, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ConfigurationError("covariance must be symmetric")
    vals, vecs = np.linalg.eigh(cov)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
    if np.min(vals) < -tol:
        raise ConfigurationError(f"covariance is not positive semidefinite (min eigenvalue {np.min(vals)})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _grid(N, T, substeps=1):
    return TimeGrid(int(N), float(T), int(substeps))


# -- Gaussian drivers -------------------------------------------------------


def gen_iid_gaussian(seed, N, T, D, covariance=None, *, replicate=0, continuous=False, substeps=32):
    """I.i.d. centered Gaussian vectors with the given covariance (identity by default)."""
    grid = _grid(N, T)
    cov = np.eye(D) if covariance is None else np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.shape != (D, D):
        raise ConfigurationError(f"covariance must be {D}x{D}, got {cov.shape}")
    L = _psd_factor(cov)
    eps = make_rng(seed, N, replicate, 0).standard_normal((grid.n_steps + 1, D))
    seq = eps @ L.T
    params = {"covariance": cov.tolist()}
    return _finish(grid, seq, "iid_gaussian", np.zeros(D), continuous, substeps, params)


def _ma1_theta(theta, D):
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (D,)).copy()
    if not np.all(np.abs(theta) < 1):
        raise ConfigurationError(f"MA(1) requires |theta| < 1 per coordinate, got {theta}")
    return theta


def _ma1_eps(seed, N, replicate, n, D):
    # Row 0 is eps(-1); row k + 1 is eps(k).
    return make_rng(seed, N, replicate, 0).standard_normal((n + 2, D))


def gen_ma1(seed, N, T, D, theta, *, replicate=0, continuous=False, substeps=32):
    """MA(1) driver xi(n) = eps(n) + theta * eps(n - 1), coordinatewise theta."""
    grid = _grid(N, T)
    theta = _ma1_theta(theta, D)
    eps = _ma1_eps(seed, N, replicate, grid.n_steps, D)
    seq = eps[1:] + theta * eps[:-1]
    return _finish(grid, seq, "ma1", np.zeros(D), continuous, substeps, {"theta": theta.tolist()})


# -- observables for deterministic maps ---------------------------------------


_OBSERVABLES = {
    "constant": lambda x, p: np.full_like(x, p.get("value", 1.0)),
    "identity": lambda x, p: p.get("amplitude", 1.0) * x,
    "cos": lambda x, p: p.get("amplitude", 1.0) * np.cos(2 * np.pi * p.get("frequency", 1) * x + p.get("phase", 0.0)),
    "sin": lambda x, p: p.get("amplitude", 1.0) * np.sin(2 * np.pi * p.get("frequency", 1) * x + p.get("phase", 0.0)),
    "power": lambda x, p: p.get("amplitude", 1.0) * x ** p.get("exponent", 0.5),
    "tent": lambda x, p: p.get("amplitude", 1.0) * np.abs(x - 0.5),
}


def make_observable(spec):
    """Catalogue Hölder observable on [0, 1] from a name or ``{"kind": ..., params}``."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _OBSERVABLES:
        raise ConfigurationError(f"unknown observable {kind!r}; choose from {sorted(_OBSERVABLES)}")
    if kind == "power" and not spec.get("exponent", 0.5) > 0:
        raise ConfigurationError("power observable needs a positive exponent")
    fn = _OBSERVABLES[kind]
    g = lambda x: fn(np.asarray(x, dtype=float), spec)
    return g, {"kind": kind, **spec}


def _mean(g, density=None):
    integrand = (lambda x: g(x)) if density is None else (lambda x: g(x) * density(x))
    value, _ = integrate.quad(integrand, 0.0, 1.0, limit=500, epsabs=1e-13, epsrel=1e-12)
    return float(value)


def _gauss_density(x):
    return 1.0 / ((1.0 + x) * np.log(2.0))


# -- deterministic dynamical drivers ----------------------------------------

_BITS = 63
_RESEED = 50


def doubling_orbit(rng, n):
    """Orbit of x -> 2x mod 1 in 63-bit fixed point, as floats in [0, 1).

    Every 50 steps the 50 low bits, which doubling has shifted to zero,
    are refilled with fresh random bits, so the orbit neither collapses
    to 0 nor loses its uniform marginal.
    """
    mask = np.uint64((1 << _BITS) - 1)
    n_blocks = -(-n // _RESEED)
    starts = np.empty(n_blocks, dtype=np.uint64)
    x = int(rng.integers(0, 1 << _BITS, dtype=np.uint64))
    low = rng.integers(0, 1 << _RESEED, size=n_blocks, dtype=np.uint64)
    for b in range(n_blocks):
        starts[b] = x
        x = ((x << _RESEED) & int(mask)) | int(low[b])
    shifts = np.arange(_RESEED, dtype=np.uint64)
    block = (starts[:, None] << shifts[None, :]) & mask
    return block.ravel()[:n].astype(float) / float(1 << _BITS)


def gen_doubling_map(seed, N, T, observable="cos", *, replicate=0, continuous=False, substeps=32):
    """xi(n) = g(F^n x0) - mean(g) for the doubling map F x = 2x mod 1."""
    grid = _grid(N, T)
    g, desc = make_observable(observable)
    mean = _mean(g)
    orbit = doubling_orbit(make_rng(seed, N, replicate, 0), grid.n_steps + 1)
    seq = (g(orbit) - mean)[:, None]
    return _finish(grid, seq, "doubling_map", [mean], continuous, substeps, {"observable": desc})


def gauss_orbit(rng, n):
    """Orbit of the Gauss map x -> frac(1/x) started from the Gauss measure."""
    draw = lambda: 2.0 ** rng.random() - 1.0
    out = np.empty(n)
    x = draw()
    while x == 0.0:
        x = draw()
    for k in range(n):
        out[k] = x
        y = 1.0 / x
        x = y - np.floor(y)
        while x == 0.0:
            x = draw()
    return out


def gen_gauss_map(seed, N, T, observable="identity", *, replicate=0, continuous=False, substeps=32):
    """xi(n) = g(F^n x0) - mean(g) for the Gauss map, centered under the Gauss measure."""
    grid = _grid(N, T)
    g, desc = make_observable(observable)
    mean = _mean(g, _gauss_density)
    orbit = gauss_orbit(make_rng(seed, N, replicate, 0), grid.n_steps + 1)
    seq = (g(orbit) - mean)[:, None]
    return _finish(grid, seq, "gauss_map", [mean], continuous, substeps, {"observable": desc})


def stationary_distribution(P, tol=1e-15, max_iter=100000):
    """Stationary row vector of a primitive stochastic matrix by power iteration."""
    P = _check_transition(P)
    pi = np.full(len(P), 1.0 / len(P))
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    return pi


def _check_transition(P):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = P.shape[0]
    if P.shape != (n, n) or np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
        raise ConfigurationError("transition matrix must be square, nonnegative and row-stochastic")
    # Primitive (irreducible and aperiodic) iff P^k > 0 at Wielandt's bound k = (n-1)^2 + 1.
    A = (P > 0).astype(float)
    R = np.eye(n)
    for _ in range((n - 1) ** 2 + 1):
        R = np.minimum(R @ A, 1.0)
    if not np.all(R > 0):
        raise ConfigurationError("transition matrix must be irreducible and aperiodic")
    return P


def gen_markov_chain(seed, N, T, transition_matrix, state_values, *, replicate=0,
                     continuous=False, substeps=32):
    """xi(n) = v(s_n) - sum_s pi(s) v(s) for the chain started from its stationary law."""
    grid = _grid(N, T)
    P = _check_transition(transition_matrix)
    v = np.asarray(state_values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != P.shape[0]:
        raise ConfigurationError(f"need one value per state: {P.shape[0]} states, {v.shape[0]} values")
    pi = stationary_distribution(P)
    mean = pi @ v
    rng = make_rng(seed, N, replicate, 0)
    n = grid.n_steps + 1
    u = rng.random(n)
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    rows = [list(r) for r in cum]
    states = np.empty(n, dtype=np.int64)
    s = min(int(np.searchsorted(np.cumsum(pi), u[0], side="right")), len(P) - 1)
    for k in range(n):
        states[k] = s
        if k + 1 < n:
            s = min(bisect.bisect_right(rows[s], u[k + 1]), len(P) - 1)
    seq = v[states] - mean
    params = {"transition_matrix": P.tolist(), "state_values": v.tolist()}
    return _finish(grid, seq, "markov_chain", mean, continuous, substeps, params)


_GENERATORS = {
    "iid_gaussian": gen_iid_gaussian,
    "ma1": gen_ma1,
    "doubling_map": gen_doubling_map,
    "gauss_map": gen_gauss_map,
    "markov_chain": gen_markov_chain,
}


def gen_driver(kind, seed, N, T, params, *, replicate=0, continuous=False, substeps=32):
    """Dispatch to a catalogue generator by name."""
    if kind not in _GENERATORS:
        raise ConfigurationError(f"unknown driver kind {kind!r}; choose from {sorted(_GENERATORS)}")
    try:
        return _GENERATORS[kind](seed, N, T, **dict(params), replicate=replicate,
                                 continuous=continuous, substeps=substeps)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for driver {kind!r}: {exc}") from exc


# -- long-run covariance ----------------------------------------------------


@dataclass
class GammaEstimate:
    """Truncated estimate of Gamma together with its per-lag terms."""

    gamma: np.ndarray
    per_lag: np.ndarray
    lag0: np.ndarray
    max_lag: int

    @property
    def cov(self):
        return self.lag0 + self.gamma + self.gamma.T


def _lag_product(x, l):
    n = len(x)
    return x[: n - l].T @ x[l:] / (n - l)


def estimate_gamma(path, max_lag, return_lags=False):
    """Gamma_ij = sum_{l=1}^{L} E xi_i(0) xi_j(l), by truncated lag sums.

    For continuous drivers the series becomes the integral of the lag
    covariance over [0, L] in fast time, evaluated by the trapezoid rule on
    the sampling mesh.
    """
    max_lag = int(max_lag)
    length = path.grid.n_steps
    if max_lag < 1 or max_lag > length / 100:
        raise ConfigurationError(f"max_lag must be in [1, length/100] = [1, {length / 100:g}], got {max_lag}")
    x = path.samples
    if path.continuous:
        m = path.grid.substeps
        lags = np.array([_lag_product(x, l) for l in range(max_lag * m + 1)])
        weights = np.full(len(lags), 1.0 / m)
        weights[0] = weights[-1] = 0.5 / m
        per_lag = lags * weights[:, None, None]
        est = GammaEstimate(per_lag.sum(axis=0), per_lag, np.zeros_like(lags[0]), max_lag)
    else:
        per_lag = np.array([_lag_product(x, l) for l in range(1, max_lag + 1)])
        est = GammaEstimate(per_lag.sum(axis=0), per_lag, _lag_product(x, 0), max_lag)
    return est if return_lags else est.gamma


def estimate_cov(path, max_lag):
    """Long-run covariance: lag-0 covariance + Gamma + Gamma^T (symmetric by construction).

    In continuous time there is no lag-0 atom and the result is Gamma + Gamma^T.
    """
    est = estimate_gamma(path, max_lag, return_lags=True)
    cov = est.cov
    return 0.5 * (cov + cov.T)


def batch_standard_errors(path, max_lag, n_batches=20):
    """Standard errors of the Gamma and long-run covariance estimates by batch means.

    The path is cut into ``n_batches`` contiguous pieces; each piece is
    estimated on its own and the spread of the batch estimates gives the
    standard error of the full-length estimate.
    """
    x = path.samples
    size = len(x) // n_batches
    if size < 100 * max_lag:
        raise ConfigurationError("path too short for the requested batch count")
    gam, cov = [], []
    for b in range(n_batches):
        piece = DriverPath(_grid(size, 1.0), x[b * size:(b + 1) * size], path.driver_kind,
                           path.centered_mean)
        est = estimate_gamma(piece, max_lag, return_lags=True)
        gam.append(est.gamma)
        cov.append(est.cov)
    scale = 1.0 / np.sqrt(n_batches)
    return np.std(gam, axis=0, ddof=1) * scale, np.std(cov, axis=0, ddof=1) * scale


# -- couplings ----------------------------------------------------------------


@dataclass
class CoupledNoise:
    """A driver and a Brownian motion W_N built from the same base randomness.

    ``brownian_increments[m]`` is W_N(tau_{m+1}) - W_N(tau_m) on the fine
    mesh tau_m = m / (N * substeps). ``gamma`` and ``cov`` are the exact
    values for the driver (the Gamma of the matching lift and the
    covariance of W at time 1).
    """

    driver: object
    brownian_increments: np.ndarray
    coupling_kind: str
    gamma: np.ndarray
    cov: np.ndarray
    grid: TimeGrid
    base: np.ndarray = None

    def brownian_path(self):
        """W_N on the fine mesh, starting at 0."""
        W = np.zeros((len(self.brownian_increments) + 1, self.brownian_increments.shape[1]))
        np.cumsum(self.brownian_increments, axis=0, out=W[1:])
        return W


def _bridge(rng, unit_increments, L, substeps):
    """Refine unit increments of a Brownian motion with covariance L L^T by bridges."""
    n, D = unit_increments.shape
    z = rng.standard_normal((n, substeps, D)) @ L.T / np.sqrt(substeps)
    z -= (z.sum(axis=1) - unit_increments)[:, None, :] / substeps
    return z.reshape(n * substeps, D)


def gen_coupled(seed, N, T, driver_kind, params, fine_substeps=32, *, replicate=0, continuous=False):
    """Driver plus an explicitly coupled Brownian motion with the driver's long-run covariance.

    i.i.d. Gaussian: the Brownian motion takes the same unit increments.
    MA(1): 𝒲(n) = (1 + theta) sum_{k<n} eps(k) from the same eps, so the
    partial sums of xi and 𝒲 differ only by theta (eps(-1) - eps(n-1)).
    Within a unit step the Brownian path is completed by a bridge drawn
    from an independent stream.
    """
    if driver_kind not in COUPLABLE:
        raise ConfigurationError(
            f"driver {driver_kind!r} has no explicit Brownian coupling (couplable: {COUPLABLE}); "
            "use the weak comparison experiment instead")
    params = dict(params)
    D = int(params.pop("D", 1))
    grid = _grid(N, T, fine_substeps)
    n = grid.n_steps
    if driver_kind == "iid_gaussian":
        cov = np.eye(D) if params.get("covariance") is None else np.atleast_2d(
            np.asarray(params["covariance"], dtype=float))
        driver = gen_iid_gaussian(seed, N, T, D, cov, replicate=replicate,
                                  continuous=continuous, substeps=fine_substeps)
        L = _psd_factor(cov)
        base = make_rng(seed, N, replicate, 0).standard_normal((n + 1, D))
        unit = (base @ L.T)[:n]
        gamma = np.zeros((D, D))
    else:
        theta = _ma1_theta(params.get("theta", 0.5), D)
        driver = gen_ma1(seed, N, T, D, theta, replicate=replicate,
                         continuous=continuous, substeps=fine_substeps)
        base = _ma1_eps(seed, N, replicate, n, D)
        L = np.diag(1.0 + theta)
        cov = L @ L
        unit = base[1:n + 1] * (1.0 + theta)
        gamma = np.diag(theta)
    if continuous:
        # Smooth interpolants have symmetric iterated integrals in the limit.
        gamma = 0.5 * cov
    fine = _bridge(make_rng(seed, N, replicate, 1), unit, L, fine_substeps) / np.sqrt(N)
    return CoupledNoise(driver, fine, driver_kind, gamma, cov, grid, base)


def gen_brownian(seed, N, T, cov, fine_substeps=32, *, replicate=0, gamma=None, stream=2):
    """A Brownian motion with covariance ``cov`` and no driver attached.

    Used where the diffusion needs noise independent of any driver; the
    ``stream`` keeps it apart from driver randomness of the same job.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    L = _psd_factor(cov)
    D = cov.shape[0]
    grid = _grid(N, T, fine_substeps)
    z = make_rng(seed, N, replicate, stream).standard_normal((grid.n_fine, D))
    fine = z @ L.T / np.sqrt(N * fine_substeps)
    gamma = np.zeros((D, D)) if gamma is None else np.atleast_2d(np.asarray(gamma, dtype=float))
    return CoupledNoise(None, fine, "independent", gamma, cov, grid, None)
