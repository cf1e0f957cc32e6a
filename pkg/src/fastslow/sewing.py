"""Step maps, defects and sewing certificates on dyadic partitions.

The germ of a path X driven by a lift (S, 𝕊) is

    Psi(s, t) = sigma(X(s)) S(s, t) + (∇sigma sigma)(X(s)) · 𝕊(s, t) + b(X(s)) tau(s, t)

with tau = t - s (continuous mode) or the mesh-floored length
([t r] - [s r]) / r on a mesh of r points per unit time (discrete mode).
Paths and lifts are both read on a common mesh; all times are floored onto
it, so every quantity here is a function of mesh indices.

Certificates compare a left-hand side with a right-hand side and come back
as :class:`BoundReport` records with status satisfied, violated or
inconclusive (a precondition of the estimate fails).
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coefficients import contract_level2, nabla_sigma_sigma
from .errors import ConfigurationError, RangeError
from .grid import floor_index
from .norms import (function_window, increment_window, iterated_window, modified_holder,
                    holder, path_window, windowed_holder)

__all__ = [
    "DyadicPartition",
    "ProofConstants",
    "BoundReport",
    "psi_step",
    "delta_psi",
    "delta_psi_decomposition",
    "remainder",
    "remainder_window",
    "dyadic_sums",
    "sewing_residual",
    "proof_constants",
    "apriori_bound_check",
    "reconstruction_level",
    "SAFETY_FACTOR",
]

SAFETY_FACTOR = 2.0
_REL = 1e-9


@dataclass
class BoundReport:
    """One certified inequality lhs <= rhs.

    ``status`` is "satisfied", "violated" or "inconclusive"; inconclusive
    reports carry NaN sides and a ``reason`` in ``inputs``.
    """

    inequality_id: str
    lhs: float
    rhs: float
    margin: float
    inputs: dict
    satisfied: bool
    status: str

    @classmethod
    def check(cls, inequality_id, lhs, rhs, **inputs):
        lhs, rhs = float(lhs), float(rhs)
        ok = bool(lhs <= rhs * (1 + _REL) + 1e-300) if rhs >= 0 else bool(lhs <= rhs)
        return cls(inequality_id, lhs, rhs, rhs - lhs, inputs, ok, "satisfied" if ok else "violated")

    @classmethod
    def inconclusive(cls, inequality_id, reason, **inputs):
        inputs["reason"] = reason
        return cls(inequality_id, math.nan, math.nan, math.nan, inputs, False, "inconclusive")

    def to_dict(self):
        return _plain(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), allow_nan=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class DyadicPartition:
    """Level-n dyadic partition of [s, t]: points s + i 2^-n (t - s), i = 0..2^n."""

    s: float
    t: float
    level: int

    def __post_init__(self):
        if not self.t >= self.s:
            raise RangeError(f"partition needs s <= t, got [{self.s}, {self.t}]")
        if self.level < 0:
            raise ConfigurationError("level must be nonnegative")

    @property
    def points(self):
        return self.s + np.arange(2 ** self.level + 1) * ((self.t - self.s) / 2 ** self.level)

    @property
    def n_intervals(self):
        return 2 ** self.level

    def refine(self):
        return DyadicPartition(self.s, self.t, self.level + 1)


# -- mesh access ----------------------------------------------------------------


def _mesh(path):
    """(states, resolution) of a slow or diffusion path, or a raw pair."""
    if hasattr(path, "mesh_states"):
        return path.mesh_states, path.mesh_resolution
    states, res = path
    return np.asarray(states, dtype=float), res


def _check_common(path, lift):
    X, res = _mesh(path)
    if res != lift.resolution or len(X) != lift.n_points:
        raise ConfigurationError(
            f"path mesh ({len(X)} points at {res}/unit) differs from lift mesh "
            f"({lift.n_points} points at {lift.resolution}/unit)")
    return X, res


def _idx(lift, t):
    return lift.index(t)


def _check_mode(mode):
    if mode not in ("continuous", "discrete"):
        raise ConfigurationError(f"mode must be 'continuous' or 'discrete', got {mode!r}")


def _psi_idx(field, X, lift, i, j, tau):
    """Germ on mesh windows [i, j] with explicit drift lengths ``tau``."""
    x = X[i]
    out = np.einsum("...ij,...j->...i", field.sigma(x), lift.increment_idx(i, j))
    out = out + contract_level2(nabla_sigma_sigma(field, x), lift.iterated_idx(i, j))
    return out + field.b(x) * np.asarray(tau, dtype=float)[..., None]


def _tau(lift, s, t, i, j, mode):
    if mode == "discrete":
        return (np.asarray(j) - np.asarray(i)) / lift.resolution
    return np.asarray(t, dtype=float) - np.asarray(s, dtype=float)


def psi_step(field, state_path, lift, s, t, mode="discrete"):
    """Psi(s, t); ``s`` and ``t`` may be arrays of equal shape."""
    _check_mode(mode)
    X, _ = _check_common(state_path, lift)
    if np.any(np.asarray(s) > np.asarray(t)):
        raise RangeError("psi_step needs s <= t")
    i, j = _idx(lift, s), _idx(lift, t)
    return _psi_idx(field, X, lift, i, j, _tau(lift, s, t, i, j, mode))


def delta_psi(field, state_path, lift, s, u, t, mode="discrete"):
    """Defect Psi(s,t) - Psi(s,u) - Psi(u,t) computed from three germs."""
    s, u, t = (np.asarray(v, dtype=float) for v in (s, u, t))
    if np.any(s > u) or np.any(u > t):
        raise RangeError("delta_psi needs s <= u <= t")
    return (psi_step(field, state_path, lift, s, t, mode) - psi_step(field, state_path, lift, s, u, mode)
            - psi_step(field, state_path, lift, u, t, mode))


def delta_psi_decomposition(field, state_path, lift, s, u, t, mode="discrete"):
    """The defect rewritten through remainders, term by term.

    Returns a dict with the three terms
    -R^{sigma(X)}(s,u) S(u,t), -(∇sigma sigma)(X)(s,u) · 𝕊(u,t) and
    -b(X)(s,u) tau(u,t), and their sum under ``"total"``.
    """
    _check_mode(mode)
    X, _ = _check_common(state_path, lift)
    s, u, t = (np.asarray(v, dtype=float) for v in (s, u, t))
    if np.any(s > u) or np.any(u > t):
        raise RangeError("delta_psi needs s <= u <= t")
    i, k, j = _idx(lift, s), _idx(lift, u), _idx(lift, t)
    xs, xu = X[i], X[k]
    Xsu = xu - xs
    g = field.grad_sigma(xs)
    RX = Xsu - np.einsum("...ij,...j->...i", field.sigma(xs), lift.increment_idx(i, k))
    grad_dot = lambda y: np.einsum("...ijl,...l->...ij", g, y)
    R_sigma = field.sigma(xu) - field.sigma(xs) - grad_dot(Xsu) + grad_dot(RX)
    first = -np.einsum("...ij,...j->...i", R_sigma, lift.increment_idx(k, j))
    dT = nabla_sigma_sigma(field, xu) - nabla_sigma_sigma(field, xs)
    second = -contract_level2(dT, lift.iterated_idx(k, j))
    third = -(field.b(xu) - field.b(xs)) * _tau(lift, u, t, k, j, mode)[..., None]
    return {"remainder_term": first, "level2_term": second, "drift_term": third,
            "total": first + second + third}


def remainder(state_path, lift, field, s, t):
    """R^X(s, t) = X(s, t) - sigma(X(s)) S(s, t)."""
    X, _ = _check_common(state_path, lift)
    if np.any(np.asarray(s) > np.asarray(t)):
        raise RangeError("remainder needs s <= t")
    i, j = _idx(lift, s), _idx(lift, t)
    return X[j] - X[i] - np.einsum("...ij,...j->...i", field.sigma(X[i]), lift.increment_idx(i, j))


def remainder_window(state_path, lift, field):
    """R^X as a window function for the Hölder-type norms."""
    X, res = _check_common(state_path, lift)
    sig = field.sigma(X)
    fn = lambda i, j: X[j] - X[i] - np.einsum("...ij,...j->...i", sig[i], lift.increment_idx(i, j))
    return function_window(fn, len(X), res, label="R")


# -- dyadic sums and the sewing certificate ----------------------------------


def reconstruction_level(s, t, resolution):
    """Smallest n with 2^-n (t - s) < 1 / resolution."""
    span = (t - s) * resolution
    if span <= 0:
        return 0
    n = max(0, int(math.floor(math.log2(span))) + 1)
    while 2.0 ** (-n) * span >= 1.0:
        n += 1
    while n > 0 and 2.0 ** (-(n - 1)) * span < 1.0:
        n -= 1
    return n


def dyadic_sums(field, state_path, lift, s, t, max_level, mode="discrete"):
    """I^n(s, t) = sum of Psi over the level-n dyadic partition, n = 0..max_level."""
    _check_mode(mode)
    X, _ = _check_common(state_path, lift)
    out = []
    for n in range(max_level + 1):
        pts = DyadicPartition(s, t, n).points
        pts[-1] = t
        i = _idx(lift, pts)
        tau = _tau(lift, pts[:-1], pts[1:], i[:-1], i[1:], mode)
        out.append(_psi_idx(field, X, lift, i[:-1], i[1:], tau).sum(axis=0))
    return np.array(out)


def _sampled_defect_constant(field, X, lift, s, t, max_level, beta, mode, n_random, rng):
    """Sampled sup of |deltaPsi(u, w, v)| / den(v - u) over dyadic and random triples."""
    us, ws, vs = [], [], []
    for n in range(max_level):
        pts = DyadicPartition(s, t, n).points
        us.append(pts[:-1])
        vs.append(pts[1:])
        ws.append(0.5 * (pts[:-1] + pts[1:]))
    if n_random:
        r = np.sort(rng.uniform(s, t, size=(n_random, 3)), axis=1)
        us.append(r[:, 0])
        ws.append(r[:, 1])
        vs.append(r[:, 2])
    u, w, v = (np.concatenate(a) for a in (us, ws, vs))
    v = np.minimum(v, t)
    i, k, j = _idx(lift, u), _idx(lift, w), _idx(lift, v)
    psi = lambda a, b, ta, tb: _psi_idx(field, X, lift, a, b, _tau(lift, ta, tb, a, b, mode))
    dpsi = psi(i, j, u, v) - psi(i, k, u, w) - psi(k, j, w, v)
    mag = np.linalg.norm(dpsi, axis=-1)
    span = (j - i) / lift.resolution if mode == "discrete" else v - u
    den = span ** beta
    if mode == "discrete":
        den = np.maximum(den, float(lift.resolution) ** (-beta))
    keep = den > 0
    ratio = np.where(keep, mag / np.where(keep, den, 1.0), 0.0)
    a = int(np.argmax(ratio))
    return float(ratio[a]), (float(u[a]), float(w[a]), float(v[a])), len(u)


def sewing_residual(field, state_path, lift, s, t, mode="discrete", max_level=None, alpha=0.45,
                    n_random=10_000, seed=0, safety=SAFETY_FACTOR):
    """Residuals |X(s,t) - I^n(s,t)| and their certificate against the dyadic tail bound.

    With K the sampled defect constant (inflated by ``safety``) and
    beta = 3 alpha, the level-n bound is

        K 2^{n(1-beta)} / (1 - 2^{1-beta}) * D(s, t)

    where D = (t - s)^beta in continuous mode and max((t-s)^beta, r^-beta)
    in discrete mode. Level 0 is the classical sewing estimate. In discrete
    mode the exact identity at the reconstruction level is certified too.
    Returns ``(residuals, reports)``.
    """
    _check_mode(mode)
    if not 1 / 3 < alpha < 1 / 2:
        raise ConfigurationError(f"need 1/3 < alpha < 1/2, got {alpha}")
    if not 0 <= s < t:
        raise RangeError(f"need 0 <= s < t, got [{s}, {t}]")
    X, res = _check_common(state_path, lift)
    beta = 3 * alpha
    if max_level is None:
        max_level = max(0, int(math.ceil(math.log2(max(res * (t - s), 1.0))))) + 2
    sums = dyadic_sums(field, state_path, lift, s, t, max_level, mode)
    i, j = _idx(lift, s), _idx(lift, t)
    inc = X[j] - X[i]
    residuals = np.linalg.norm(inc - sums, axis=-1)
    rng = np.random.default_rng(seed)
    K, witness, n_triples = _sampled_defect_constant(field, X, lift, s, t, max_level, beta, mode,
                                                     n_random, rng)
    D = (t - s) ** beta
    if mode == "discrete":
        D = max(D, float(res) ** (-beta))
    factor = 1.0 / (1.0 - 2.0 ** (1.0 - beta))
    bounds = safety * K * factor * D * 2.0 ** (np.arange(max_level + 1) * (1.0 - beta))
    worst = int(np.argmax(residuals - bounds))
    ineq = "sewing_3_13" if mode == "discrete" else "sewing_3_2"
    inputs = dict(s=s, t=t, alpha=alpha, beta=beta, mode=mode, max_level=max_level,
                  sampled_defect_constant=K, defect_witness=witness, sampled_triples=n_triples,
                  safety_factor=safety, sampled_constant_is_lower_bound=True,
                  level0_residual=float(residuals[0]), level0_bound=float(bounds[0]),
                  worst_level=worst, residuals=residuals.tolist(), bounds=bounds.tolist())
    reports = [BoundReport.check(ineq, residuals[worst], bounds[worst], **inputs)]
    if mode == "discrete":
        n_N = reconstruction_level(s, t, res)
        scale = 1.0 + float(np.max(np.abs(X)))
        if n_N <= max_level:
            r = float(np.max(residuals[n_N:]))
        else:
            r = float(np.linalg.norm(inc - dyadic_sums(field, state_path, lift, s, t, n_N, mode)[-1]))
        reports.append(BoundReport.check("recon_2_11", r, 1e-12 * scale, s=s, t=t, level=n_N))
    return residuals, reports


# -- proof constants ------------------------------------------------------------


def _bisect_sup(f, lo, hi, target, tol=1e-12):
    """sup{h in [lo, hi] : f(h) <= target} for nondecreasing f with f(lo) <= target."""
    if f(hi) <= target:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class ProofConstants:
    """Constants of the a-priori estimate, evaluated from declared sup-norms and driver norms."""

    alpha: float
    N: float
    C_sigma: float
    C_sigma_tilde: float
    C_sigma_hat: float
    h0: float
    h1: float
    h0N: float
    cell_smallness: float
    norms: dict
    diagnostics: list = field(default_factory=list)
    lambda_h: object = field(default=None, repr=False)
    lambda_hN: object = field(default=None, repr=False)

    def phi_h(self, X_window, h, N=None):
        """phi_h = 4 h^alpha ||X||_{alpha,h} (with the modified norm when N is given)."""
        if N is None:
            return 4 * h ** self.alpha * windowed_holder(X_window, self.alpha, h).value
        s = max(h ** self.alpha, N ** (-self.alpha))
        return 4 * s * windowed_holder(X_window, self.alpha, h, N=N).value

    def summary(self):
        keep = ("alpha", "N", "C_sigma", "C_sigma_tilde", "C_sigma_hat", "h0", "h1", "h0N",
                "cell_smallness", "norms", "diagnostics")
        return _plain({k: getattr(self, k) for k in keep})


def _sigma_constants(sup):
    s0, g1, g2 = sup["sigma"], sup["grad_sigma"], sup["grad2_sigma"]
    C = 2 * (g1 + g2 + g1 ** 2 + g2 * s0)
    Ct = 12 / 5 * s0 + 2 * g1 * s0 + 1
    Ch = 4 * (s0 + g2 + g1 ** 2 + g2 * s0 + 2 * g1 * s0 + 1)
    return C, Ct, Ch


def proof_constants(field, lift, alpha, N=None):
    """C_sigma, C~_sigma, C^_sigma, h0, h1 (and h0N plus the single-cell smallness quantity when N is given).

    Driver norms are grid-sup values on the lift's mesh; ``h1`` uses the
    windowed norm ||𝕊||_{2alpha,h}, which below the mesh falls back to the
    interpolant bound of :func:`windowed_holder`.
    """
    if not 1 / 3 < alpha < 1 / 2:
        raise ConfigurationError(f"need 1/3 < alpha < 1/2, got {alpha}")
    sup = field.sup_norms
    s0, g1 = sup["sigma"], sup["grad_sigma"]
    C, Ct, Ch = _sigma_constants(sup)
    Sw, Aw = increment_window(lift), iterated_window(lift)
    S_a = holder(Sw, alpha).value
    A_2a = holder(Aw, 2 * alpha).value
    norms = {"S_alpha": S_a, "A_2alpha": A_2a}
    diagnostics = []
    gap = 1 - 2 ** (1 - 3 * alpha)

    f0 = lambda h: h ** alpha * C * (S_a + math.sqrt(A_2a)) + h ** (1 - 2 * alpha) * (
        sup["b"] + h ** alpha * sup["grad_b"])
    h0 = _bisect_sup(f0, 0.0, 1.0, gap)
    if h0 <= 0:
        diagnostics.append("h0 = 0: driver norms too large")

    def lam(h):
        if h <= 0:
            return 0.0
        if Aw.mesh_speed is None and h < 1 / lift.resolution:
            A_h = A_2a  # no interpolant bound: the full norm dominates the windowed one
        else:
            A_h = windowed_holder(Aw, 2 * alpha, h).value
        return 4 * h ** alpha * s0 * S_a + 4 * h ** (2 * alpha) * (2 * g1 * s0 + 1) * A_h + 8 * h ** (2 * alpha)

    h1 = _bisect_sup(lam, 0.0, h0, 5 / 72) if h0 > 0 else 0.0
    if h0 > 0 and h1 <= 0:
        diagnostics.append("h1 = 0: lambda_h exceeds 5/72 for every h")

    h0N, small, lamN = math.nan, math.nan, None
    if N is not None:
        S_aN = modified_holder(Sw, alpha, N).value
        A_2aN = modified_holder(Aw, 2 * alpha, N).value
        norms.update(S_alpha_N=S_aN, A_2alpha_N=A_2aN)
        fl = lambda h: max(h, 1.0 / N)
        fN = lambda h: Ch * fl(h) ** alpha * (S_aN + math.sqrt(A_2aN)) + fl(h) ** (1 - 2 * alpha) * (
            sup["b"] + sup["grad_b"])
        target = 5 / 72 * gap
        h0N = _bisect_sup(fN, 0.0, 1.0, target) if fN(0.0) <= target else 0.0
        if h0N <= 0:
            diagnostics.append("h0N = 0: discrete smallness condition fails at this N")
        lamN = lambda h: (4 * max(h ** alpha, N ** -alpha) * s0 * S_aN
                          + 4 * max(h ** (2 * alpha), N ** (-2 * alpha)) * (2 * g1 * s0 + 1) * A_2aN
                          + 8 * max(h ** (2 * alpha), N ** (-2 * alpha)))
        small = 4 * N ** (-alpha) * s0 * (S_aN + g1 * N ** (-alpha) * A_2aN)
    return ProofConstants(alpha, N, C, Ct, Ch, h0, h1, h0N, small, norms, diagnostics, lam, lamN)


def apriori_bound_check(field, state_path, lift, alpha, mode="continuous", constants=None):
    """||X||_{alpha,h} <= C~_sigma (||S||_alpha + sqrt(||𝕊||_{2alpha}) + 1) for h up to the threshold.

    Continuous mode uses h1 and plain norms; discrete mode uses h0N,
    modified norms and requires the single-cell smallness quantity
    4 N^-alpha ||sigma|| (||S||_{alpha,N} + ||∇sigma|| N^-alpha ||𝕊||_{2alpha,N})
    to be at most 1/6.
    The supremum over h <= threshold is the value at the threshold, since
    windowed norms grow with h.
    """
    _check_mode(mode)
    X, res = _check_common(state_path, lift)
    N = lift.grid.N if mode == "discrete" else None
    pc = constants or proof_constants(field, lift, alpha, N)
    Xw = path_window(X, res, label="X")
    common = dict(alpha=alpha, mode=mode, C_sigma_tilde=pc.C_sigma_tilde, h0=pc.h0, h1=pc.h1,
                  h0N=pc.h0N, norms=pc.norms)
    if mode == "continuous":
        if not pc.h1 > 0:
            return BoundReport.inconclusive("apriori_3_12", "h1 = 0", **common)
        lhs = windowed_holder(Xw, alpha, pc.h1).value
        rhs = pc.C_sigma_tilde * (pc.norms["S_alpha"] + math.sqrt(pc.norms["A_2alpha"]) + 1)
        return BoundReport.check("apriori_3_12", lhs, rhs, h=pc.h1, **common)
    if not pc.h0N > 0:
        return BoundReport.inconclusive("apriori_3_18", "h0N = 0 (discrete smallness condition fails)",
                                        cell_smallness=pc.cell_smallness, **common)
    if not pc.cell_smallness <= 1 / 6:
        return BoundReport.inconclusive("apriori_3_18", "single-cell smallness quantity exceeds 1/6",
                                        cell_smallness=pc.cell_smallness, **common)
    lhs = windowed_holder(Xw, alpha, pc.h0N, N=N).value
    rhs = pc.C_sigma_tilde * (pc.norms["S_alpha_N"] + math.sqrt(pc.norms["A_2alpha_N"]) + 1)
    return BoundReport.check("apriori_3_18", lhs, rhs, h=pc.h0N, cell_smallness=pc.cell_smallness, **common)
