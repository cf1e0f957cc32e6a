"""Experiment harness: coupled convergence rates, certificates on coupled runs,
weak comparison for drivers without an explicit coupling, and rate fits.

Replicates are keyed by (seed, N, replicate). Work is cut into fixed blocks
of ``BLOCK`` replicates so the arithmetic, and therefore every reported
number, is the same whether blocks run in one process or in many.
"""

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats

from .coefficients import field_from_config
from .diffusion import solve_sde_batch
from .drivers import (COUPLABLE, estimate_cov, estimate_gamma, gen_brownian, gen_coupled,
                      gen_driver)
from .errors import ConfigurationError, FitError
from .lift import coarsen, lift_brownian, lift_continuous, lift_discrete
from .norms import (G_MAX, Window, holder, increment_window, iterated_window, modified_holder,
                    p_variation_values, path_window)
from .sewing import BoundReport, _sigma_constants
from .slow_motion import simulate_continuous_batch, simulate_discrete_batch

__all__ = [
    "ExperimentConfig",
    "RateResult",
    "RateFit",
    "CoupledRun",
    "WeakReport",
    "run_coupled_runs",
    "run_coupled_convergence",
    "variational_transfer_check",
    "block_lipschitz_check",
    "run_weak_comparison",
    "fit_rate",
    "BLOCK",
    "NORM_KINDS",
]

BLOCK = 8
NORM_KINDS = ("X_minus_Xi_p", "X_minus_Xi_alpha_N", "S_minus_W_alpha_N", "SS_minus_WW_2alpha_N")
_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


# -- configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Run configuration; ``driver`` and ``coefficients`` are catalogue blocks.

    driver: {"kind": ..., "params": {...}, "max_lag": L}
    coefficients: {"family": ..., <family parameters>}
    """

    driver: dict
    coefficients: dict
    N_grid: list = field(default_factory=lambda: [256, 512, 1024, 2048, 4096, 8192])
    replicates: int = 64
    alpha: float = 0.45
    p: float = 2.4
    seed: int = 0
    x0: object = 0.0
    T: float = 1.0
    substeps: int = 32
    continuous: bool = False
    scheme: str = "milstein"
    N: int = 1024
    n_windows: int = 100

    def __post_init__(self):
        if not 1 / 3 < self.alpha < 1 / 2:
            raise ConfigurationError(f"need 1/3 < alpha < 1/2, got {self.alpha}")
        if not (self.p * self.alpha > 1 and self.p < 3):
            raise ConfigurationError(f"need p alpha > 1 and p < 3, got p={self.p}, alpha={self.alpha}")
        if not self.N_grid or any(int(n) != n or n < 1 for n in self.N_grid):
            raise ConfigurationError(f"N_grid must hold positive integers, got {self.N_grid}")
        if int(self.replicates) < 1 or int(self.substeps) < 1:
            raise ConfigurationError("replicates and substeps must be positive")
        if "kind" not in self.driver:
            raise ConfigurationError("driver block needs a 'kind'")
        if "family" not in self.coefficients:
            raise ConfigurationError("coefficients block needs a 'family'")
        if self.scheme not in ("euler", "milstein"):
            raise ConfigurationError(f"scheme must be 'euler' or 'milstein', got {self.scheme!r}")
        self.N_grid = [int(n) for n in self.N_grid]
        self.replicates = int(self.replicates)
        self.substeps = int(self.substeps)
        self.N = int(self.N)
        self.n_windows = int(self.n_windows)

    @classmethod
    def from_dict(cls, doc):
        """Build from the run document ``{"driver": ..., "coefficients": ..., "experiment": ...}``."""
        doc = dict(doc)
        exp = dict(doc.get("experiment", {}))
        known = {f for f in cls.__dataclass_fields__} - {"driver", "coefficients"}
        unknown = set(exp) - known - {"out", "threads"}
        if unknown:
            raise ConfigurationError(f"unknown experiment keys: {sorted(unknown)}")
        exp = {k: v for k, v in exp.items() if k in known}
        if "driver" not in doc or "coefficients" not in doc:
            raise ConfigurationError("config needs 'driver' and 'coefficients' blocks")
        return cls(driver=dict(doc["driver"]), coefficients=dict(doc["coefficients"]), **exp)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        exp = {k: d.pop(k) for k in list(d) if k not in ("driver", "coefficients")}
        if isinstance(exp["x0"], np.ndarray):
            exp["x0"] = exp["x0"].tolist()
        return {"driver": d["driver"], "coefficients": d["coefficients"], "experiment": exp}

    @property
    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def field(self):
        return field_from_config(self.coefficients)

    @property
    def driver_params(self):
        return dict(self.driver.get("params", {}))

    @property
    def max_lag(self):
        return int(self.driver.get("max_lag", 50))


# -- rate fitting -------------------------------------------------------------------


class RateFit(NamedTuple):
    slope: float
    intercept: float
    r2: float

    @property
    def delta(self):
        return -self.slope


def fit_rate(xs, ys):
    """Ordinary least squares of ys on xs; the rate estimate is ``-slope``."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise FitError("xs and ys must be 1-d arrays of equal length")
    if len(xs) < 4:
        raise FitError(f"need at least 4 points, got {len(xs)}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise FitError("non-finite values in the fit")
    xc = xs - xs.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-300 * max(1.0, float(np.max(np.abs(xs)))):
        raise FitError("degenerate xs: all values equal")
    slope = float(xc @ (ys - ys.mean())) / sxx
    intercept = float(ys.mean() - slope * xs.mean())
    resid = ys - (intercept + slope * xs)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return RateFit(slope, intercept, r2)


# -- coupled runs -------------------------------------------------------------------


@dataclass
class CoupledRun:
    """One replicate: the slow path, the diffusion, and both lifts on their meshes."""

    N: int
    replicate: int
    mode: str
    X_mesh: np.ndarray
    X_resolution: int
    Xi_fine: np.ndarray
    fine_resolution: int
    lift_S: object
    lift_W: object
    noise: object

    @property
    def substeps(self):
        return self.fine_resolution // self.N

    @property
    def X_coarse(self):
        return self.X_mesh[:: self.X_resolution // self.N]

    @property
    def Xi_coarse(self):
        return self.Xi_fine[:: self.substeps]

    def X_on_fine(self):
        """X on the fine mesh (held constant on coarse cells in discrete mode)."""
        if self.X_resolution == self.fine_resolution:
            return self.X_mesh
        M = self.fine_resolution // self.X_resolution
        k = np.arange(len(self.Xi_fine)) // M
        return self.X_mesh[np.minimum(k, len(self.X_mesh) - 1)]


def run_coupled_runs(cfg, N, replicates, field=None):
    """Simulate coupled replicates at one N in a single vectorized batch."""
    field = field or cfg.field()
    kind = cfg.driver["kind"]
    if kind not in COUPLABLE:
        raise ConfigurationError(
            f"driver {kind!r} has no explicit coupling; use run_weak_comparison instead")
    M = cfg.substeps
    noises = [gen_coupled(cfg.seed, N, cfg.T, kind, cfg.driver_params, M, replicate=r,
                          continuous=cfg.continuous) for r in replicates]
    xi = np.stack([nz.driver.samples for nz in noises])
    if cfg.continuous:
        X = simulate_continuous_batch(field, xi, N, M, cfg.x0)
        lifts_S = [lift_continuous(nz.driver) for nz in noises]
        res_X = N * M
    else:
        X = simulate_discrete_batch(field, xi, N, cfg.x0)
        lifts_S = [lift_discrete(nz.driver) for nz in noises]
        res_X = N
    lifts_W = [lift_brownian(nz, nz.gamma) for nz in noises]
    gamma = noises[0].gamma
    dW = np.stack([nz.brownian_increments for nz in noises])
    if cfg.scheme == "milstein":
        Xi = solve_sde_batch(field, dW, gamma, cfg.x0, "milstein",
                             np.stack([L.prefix_S for L in lifts_W]),
                             np.stack([L.prefix_A for L in lifts_W]), M, N * M)
    else:
        Xi = solve_sde_batch(field, dW, gamma, cfg.x0, "euler", resolution=N * M)
    mode = "continuous" if cfg.continuous else "discrete"
    return [CoupledRun(N, r, mode, X[k], res_X, Xi[k], N * M, lifts_S[k], lifts_W[k], noises[k])
            for k, r in enumerate(replicates)]


def _level2_difference(a, b):
    fn = lambda i, j: a.iterated_idx(i, j) - b.iterated_idx(i, j)
    return Window(fn, a.n_points, float(a.resolution), False, 2, None, None, "A-WW")


def _rate_norms(run, alpha, p):
    """The four distance norms of one replicate, all on the coarse grid k/N."""
    N = run.N
    D = run.X_coarse - run.Xi_coarse
    S = coarsen(run.lift_S, run.lift_S.resolution // N)
    W = coarsen(run.lift_W, run.substeps)
    return {
        "X_minus_Xi_p": p_variation_values(D, p)[0],
        "X_minus_Xi_alpha_N": modified_holder(path_window(D, N), alpha, N).value,
        "S_minus_W_alpha_N": modified_holder(path_window(S.prefix_S - W.prefix_S, N), alpha, N).value,
        "SS_minus_WW_2alpha_N": modified_holder(_level2_difference(S, W), 2 * alpha, N).value,
    }


def _rate_job(cfg_doc, N, replicates):
    cfg = ExperimentConfig.from_dict(cfg_doc)
    out = []
    for run in run_coupled_runs(cfg, N, replicates):
        for kind, value in _rate_norms(run, cfg.alpha, cfg.p).items():
            out.append((N, run.replicate, kind, float(value)))
    return out


def _jobs(cfg):
    for N in cfg.N_grid:
        for start in range(0, cfg.replicates, BLOCK):
            yield N, list(range(start, min(start + BLOCK, cfg.replicates)))


def _run_jobs(fn, cfg, threads):
    doc = cfg.to_dict()
    jobs = list(_jobs(cfg))
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, [doc] * len(jobs), [j[0] for j in jobs], [j[1] for j in jobs]))
    else:
        parts = [fn(doc, N, reps) for N, reps in jobs]
    return [rec for part in parts for rec in part]


@dataclass
class RateResult:
    """Per-N quantiles of the distance norms and log-log rate fits."""

    N_grid: list
    quantiles: dict
    fits: dict
    records: list
    config_hash: str

    @property
    def delta(self):
        return self.fits["X_minus_Xi_p"]["delta"]

    @property
    def r2(self):
        return self.fits["X_minus_Xi_p"]["r2"]

    def medians(self, kind):
        return [self.quantiles[kind][str(N)]["q50"] for N in self.N_grid]

    def summary(self):
        return {"config_hash": self.config_hash, "N_grid": self.N_grid, "delta_hat": self.delta,
                "r2": self.r2, "fits": self.fits, "quantiles": self.quantiles}


def run_coupled_convergence(config, threads=1):
    """Distance norms between X_N and Ξ_N across N_grid and their fitted decay rates.

    Medians over replicates are regressed on log N; ``delta`` is minus the
    slope. Norms are evaluated on the coarse grid k/N.
    """
    records = sorted(_run_jobs(_rate_job, config, threads), key=lambda r: (r[0], r[1], r[2]))
    quantiles, fits = {}, {}
    for kind in NORM_KINDS:
        quantiles[kind] = {}
        for N in config.N_grid:
            vals = np.array([v for (n, _, k, v) in records if n == N and k == kind])
            qs = np.quantile(vals, _QUANTILES)
            quantiles[kind][str(N)] = {f"q{int(q * 100)}": float(v) for q, v in zip(_QUANTILES, qs)}
        med = np.array([quantiles[kind][str(N)]["q50"] for N in config.N_grid])
        if len(config.N_grid) >= 4 and np.all(med > 0):
            f = fit_rate(np.log(config.N_grid), np.log(med))
            fits[kind] = {"delta": f.delta, "slope": f.slope, "intercept": f.intercept, "r2": f.r2}
        else:
            fits[kind] = {"delta": math.nan, "slope": math.nan, "intercept": math.nan, "r2": math.nan,
                          "note": "needs at least 4 N values with positive medians"}
    return RateResult(list(config.N_grid), quantiles, fits, records, config.config_hash)


# -- certificates on coupled runs --------------------------------------------------


def _subsampled(values, resolution, cap=G_MAX):
    n = len(values) - 1
    stride = max(1, -(-n // cap))
    idx = np.arange(0, n + 1, stride)
    return values[idx], resolution / stride, stride


def variational_transfer_check(slow, xi, alpha, p, N=None, config_hash=None):
    """||X_N - Ξ||_p <= T^alpha ||X_N - Ξ||_{alpha,N} + T^{1/p} N^{-(alpha - 1/p)} (||Ξ||_alpha + ||X_N||_{alpha,N}).

    ``slow`` and ``xi`` are a :class:`CoupledRun` (pass ``xi=None``) or a
    slow path and a diffusion path. Every norm is taken on one common grid:
    the fine mesh, evenly subsampled to at most ``G_MAX`` intervals. The
    report also carries the split of the optimal partition into long
    (span >= 1/N) and short intervals, and the bound the split proves,
    which has an extra factor 2^{1-1/p} on the second term.
    """
    if not (1 / 3 < alpha < 1 / 2 and p * alpha > 1 and p < 3):
        raise ConfigurationError(f"need 1/3 < alpha < 1/2, p alpha > 1, p < 3; got alpha={alpha}, p={p}")
    if isinstance(slow, CoupledRun):
        run = slow
        N = run.N
        Xf, Xi_f, res = run.X_on_fine(), run.Xi_fine, run.fine_resolution
    else:
        N = N or slow.grid.N
        res = xi.mesh_resolution
        Xi_f = xi.mesh_states
        if slow.mode == "continuous":
            Xf = slow.fine_states
        else:
            M = res // slow.grid.N
            Xf = slow.states[np.minimum(np.arange(len(Xi_f)) // M, len(slow.states) - 1)]
    if len(Xf) != len(Xi_f):
        raise ConfigurationError("slow path and diffusion live on different meshes")
    T = (len(Xf) - 1) / res
    D, r, stride = _subsampled(Xf - Xi_f, res)
    Xs, _, _ = _subsampled(Xf, res)
    Zs, _, _ = _subsampled(Xi_f, res)
    lhs, parts = p_variation_values(D, p)
    dn = modified_holder(path_window(D, r), alpha, N).value
    xi_a = holder(path_window(Zs, r), alpha).value
    x_aN = modified_holder(path_window(Xs, r), alpha, N).value
    second = T ** (1 / p) * N ** (-(alpha - 1 / p)) * (xi_a + x_aN)
    rhs = T ** alpha * dn + second
    parts = np.asarray(parts)
    spans = np.diff(parts) / r
    long_ = spans >= 1.0 / N - 1e-12
    mag = lambda A: np.linalg.norm(A[parts[1:]] - A[parts[:-1]], axis=-1) ** p
    J1 = float(np.sum(mag(D)[long_]))
    J2 = float(np.sum(mag(Xs)[~long_]))
    J3 = float(np.sum(mag(Zs)[~long_]))
    derived = T ** alpha * dn + 2 ** (1 - 1 / p) * second
    return BoundReport.check(
        "transfer_2_15", lhs, rhs, alpha=alpha, p=p, N=N, T=T, grid_stride=stride,
        grid_points=len(D), diff_alpha_N=dn, xi_alpha=xi_a, x_alpha_N=x_aN, J1=J1, J2=J2, J3=J3,
        split_bound=derived, split_bound_satisfied=bool(lhs <= derived * (1 + 1e-9)),
        config_hash=config_hash)


def _norm(window, beta, N):
    return (modified_holder(window, beta, N) if N else holder(window, beta)).value


def block_lipschitz_check(field, run, alpha, h=None, mode=None, n_blocks=64, rho=None, config_hash=None):
    """Blockwise Lipschitz estimate ||X - Ξ||_{alpha,[s,s+h]} <= A |X(s) - Ξ(s)| + B.

    A = (1 + ||∇sigma||)(||S|| + sqrt||𝕊|| + ||W|| + sqrt||𝕎||) and
    B = ||S - W|| + sqrt||𝕊 - 𝕎||. A block is applicable when
    (h^alpha, floored at N^-alpha in discrete mode) times
    (||S|| + sqrt||𝕊|| + ||W|| + sqrt||𝕎|| + 1) is at most rho, with
    rho = 0.05 / (1 + C_sigma) by default. ``h=None`` picks the largest
    applicable h in continuous mode (and 1/N in discrete mode).

    Continuous mode compares on the fine mesh; blocks shorter than the mesh
    start at mesh points, so each lies in one linear piece and its norm is
    the piece's slope times h^{1-alpha}. Discrete mode uses modified norms
    on the coarse grid.
    """
    mode = mode or run.mode
    if not 1 / 3 < alpha < 1 / 2:
        raise ConfigurationError(f"need 1/3 < alpha < 1/2, got {alpha}")
    C, _, _ = _sigma_constants(field.sup_norms)
    rho = 0.05 / (1 + C) if rho is None else float(rho)
    N = run.N
    if mode == "continuous":
        if run.X_resolution != run.fine_resolution:
            raise ConfigurationError("continuous blocks need X on the fine mesh")
        S, W, res, Nmod = run.lift_S, run.lift_W, run.fine_resolution, None
        D = run.X_mesh - run.Xi_fine
    else:
        S = coarsen(run.lift_S, run.lift_S.resolution // N)
        W = coarsen(run.lift_W, run.substeps)
        res, Nmod = N, N
        D = run.X_coarse - run.Xi_coarse
    nS = _norm(increment_window(S), alpha, Nmod)
    nA = _norm(iterated_window(S), 2 * alpha, Nmod)
    nW = holder(increment_window(run.lift_W), alpha).value
    nWW = holder(iterated_window(run.lift_W), 2 * alpha).value
    nSW = _norm(path_window(S.prefix_S - W.prefix_S, res), alpha, Nmod)
    nAW = _norm(_level2_difference(S, W), 2 * alpha, Nmod)
    total = nS + math.sqrt(nA) + nW + math.sqrt(nWW)
    A = (1 + field.sup_norms["grad_sigma"]) * total
    B = nSW + math.sqrt(nAW)
    if h is None:
        h = (rho / (total + 1)) ** (1 / alpha) if mode == "continuous" else 1.0 / N
    scale = h ** alpha if Nmod is None else max(h ** alpha, Nmod ** (-alpha))
    gate = scale * (total + 1)
    ineq = "block_lipschitz_4_12" if mode == "continuous" else "block_lipschitz_4_20"
    inputs = dict(alpha=alpha, h=h, rho=rho, gate=gate, A=A, B=B, N=N, mode=mode, n_blocks=n_blocks,
                  norms=dict(S=nS, SS=nA, W=nW, WW=nWW, S_minus_W=nSW, SS_minus_WW=nAW),
                  config_hash=config_hash)
    if gate > rho:
        return BoundReport.inconclusive(ineq, "smallness gate unmet", applicable=0,
                                        inconclusive_blocks=n_blocks, violated=0, **inputs)
    n = len(D) - 1
    span = max(1, int(math.floor(h * res + 1e-9)))
    starts = np.unique(np.linspace(0, max(n - span, 0), n_blocks).astype(int))
    Dw = path_window(D, res)
    mesh = 1.0 / res
    lhs_all, rhs_all = [], []
    for i in starts:
        if h < mesh * (1 - 1e-9):
            slope = float(np.linalg.norm(D[i + 1] - D[i])) * res
            lhs = slope * h ** (1 - alpha)
        else:
            interval = (i / res, min((i + span) / res, n / res))
            lhs = (modified_holder(Dw, alpha, Nmod, interval) if Nmod else holder(Dw, alpha, interval)).value
        lhs_all.append(lhs)
        rhs_all.append(A * float(np.linalg.norm(D[i])) + B)
    lhs_all, rhs_all = np.array(lhs_all), np.array(rhs_all)
    ok = lhs_all <= rhs_all * (1 + 1e-9)
    w = int(np.argmax(lhs_all - rhs_all))
    report = BoundReport.check(ineq, lhs_all[w], rhs_all[w], applicable=len(starts),
                               inconclusive_blocks=0, violated=int(np.sum(~ok)), **inputs)
    return report


# -- weak comparison ------------------------------------------------------------------


@dataclass
class WeakReport:
    """Distributional distance between X_N(T) and Ξ(T) ensembles across N."""

    per_N: list
    gamma_hat: np.ndarray
    cov_hat: np.ndarray
    config_hash: str
    ks_fit: dict = None

    def summary(self):
        return {"config_hash": self.config_hash, "gamma_hat": np.asarray(self.gamma_hat).tolist(),
                "cov_hat": np.asarray(self.cov_hat).tolist(), "per_N": self.per_N, "ks_fit": self.ks_fit}


_LONG_REPLICATE = 2 ** 31 - 1


def _weak_job(cfg_doc, N, replicates, gamma_hat, cov_hat, self_test):
    cfg = ExperimentConfig.from_dict(cfg_doc)
    field = cfg.field()
    M = cfg.substeps

    def diffusion(stream):
        noises = [gen_brownian(cfg.seed, N, cfg.T, cov_hat, M, replicate=r, gamma=gamma_hat, stream=stream)
                  for r in replicates]
        lifts = [lift_brownian(nz, gamma_hat) for nz in noises]
        Xi = solve_sde_batch(field, np.stack([nz.brownian_increments for nz in noises]), gamma_hat,
                             cfg.x0, "milstein", np.stack([L.prefix_S for L in lifts]),
                             np.stack([L.prefix_A for L in lifts]), M, N * M)
        return Xi[:, -1]

    if self_test:
        XT = diffusion(3)
    else:
        xi = np.stack([gen_driver(cfg.driver["kind"], cfg.seed, N, cfg.T, cfg.driver_params,
                                  replicate=r).samples for r in replicates])
        XT = simulate_discrete_batch(field, xi, N, cfg.x0)[:, -1]
    return [(N, r, XT[k], Z) for k, (r, Z) in enumerate(zip(replicates, diffusion(2)))]


def run_weak_comparison(config, threads=1, self_test=False, long_length=2 ** 18):
    """Compare the laws of X_N(T) and Ξ(T) built from independent noise.

    Gamma and the long-run covariance come from one long driver path.
    For each N the report lists coordinatewise two-sample Kolmogorov-Smirnov
    statistics and the gaps between ensemble means and covariances.
    ``self_test`` replaces the X ensemble by a second diffusion ensemble.
    """
    kind = config.driver["kind"]
    long_path = gen_driver(kind, config.seed, long_length, 1.0, config.driver_params,
                           replicate=_LONG_REPLICATE)
    gamma_hat = estimate_gamma(long_path, config.max_lag)
    cov_hat = estimate_cov(long_path, config.max_lag)
    doc = config.to_dict()
    jobs = list(_jobs(config))
    args = ([doc] * len(jobs), [j[0] for j in jobs], [j[1] for j in jobs], [gamma_hat] * len(jobs),
            [cov_hat] * len(jobs), [self_test] * len(jobs))
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_weak_job, *args))
    else:
        parts = [_weak_job(*a) for a in zip(*args)]
    recs = sorted((r for part in parts for r in part), key=lambda r: (r[0], r[1]))
    per_N = []
    for N in config.N_grid:
        X = np.array([r[2] for r in recs if r[0] == N])
        Z = np.array([r[3] for r in recs if r[0] == N])
        ks = [stats.ks_2samp(X[:, i], Z[:, i]) for i in range(X.shape[1])]
        cx = np.atleast_2d(np.cov(X.T))
        cz = np.atleast_2d(np.cov(Z.T))
        per_N.append({"N": N, "ks_statistic": [float(k.statistic) for k in ks],
                      "ks_pvalue": [float(k.pvalue) for k in ks],
                      "mean_gap": float(np.linalg.norm(X.mean(axis=0) - Z.mean(axis=0))),
                      "cov_gap": float(np.linalg.norm(cx - cz))})
    ks_fit = None
    ks_max = np.array([max(e["ks_statistic"]) for e in per_N])
    if len(per_N) >= 4 and np.all(ks_max > 0):
        f = fit_rate(np.log(config.N_grid), np.log(ks_max))
        ks_fit = {"delta": f.delta, "r2": f.r2}
    return WeakReport(per_N, gamma_hat, cov_hat, config.config_hash, ks_fit)
