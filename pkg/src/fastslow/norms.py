"""Hölder-type seminorms and p-variation of grid-sampled window functions.

A window function V(u, v) is evaluated on the pairs of a uniform mesh
t_i = i / resolution. All Hölder-type norms come from one *span profile*:
for every span k (in mesh steps) the largest |V(t_i, t_{i+k})| and its
first witness i. Dividing by the span's denominator and maximizing over k
gives the plain, modified (denominator floored at N^-beta) and windowed
(spans up to h) seminorms, so one O(G^2) scan serves every variant.

Meshes with more than ``G_MAX`` intervals inside the requested interval are
subsampled with an even stride, recorded in the report.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolation, DegenerateInputError

__all__ = [
    "G_MAX",
    "Window",
    "SeminormReport",
    "NormComparison",
    "path_window",
    "increment_window",
    "iterated_window",
    "function_window",
    "difference_window",
    "holder",
    "modified_holder",
    "windowed_holder",
    "p_variation",
    "p_variation_values",
    "norm_comparison",
]

G_MAX = 4096

# Relative slack for comparing spans with h, so h = k / resolution keeps span k.
_SPAN_SLACK = 1e-9


@dataclass
class Window:
    """A window function on the uniform mesh t_i = i / resolution, i < n_points.

    ``fn(i, j)`` returns V(t_i, t_j) for index arrays, with the value shape
    trailing. ``additive`` marks path increments (V(u,v) = x(v) - x(u)),
    the only kind p-variation accepts. ``level`` is the homogeneity degree
    (1 for paths, 2 for iterated integrals). ``mesh_speed`` bounds the
    speed of the piecewise-linear interpolant of the underlying path and
    drives windowed norms below the mesh size.
    """

    fn: object
    n_points: int
    resolution: float
    additive: bool = False
    level: int = 1
    mesh_speed: float = None
    values: np.ndarray = None
    label: str = ""
    _profiles: dict = field(default_factory=dict, repr=False)

    @property
    def times(self):
        return np.arange(self.n_points) / self.resolution

    def __call__(self, i, j):
        return self.fn(np.asarray(i), np.asarray(j))

    def magnitude(self, i, j):
        val = self(i, j)
        axes = tuple(range(np.ndim(i), val.ndim))
        return np.sqrt(np.sum(val * val, axis=axes)) if axes else np.abs(val)


def _as_values(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 0:
        raise DegenerateInputError("path needs at least two samples")
    return values


def path_window(values, resolution, label="path"):
    """Increments x(t_j) - x(t_i) of a sampled path."""
    x = _as_values(values)
    if len(x) < 2:
        raise DegenerateInputError("path needs at least two samples")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("path samples must be finite")
    flat = x.reshape(len(x), -1)
    speed = float(np.max(np.linalg.norm(np.diff(flat, axis=0), axis=1))) * resolution
    return Window(lambda i, j: x[j] - x[i], len(x), float(resolution), True, 1, speed, x, label)


def increment_window(lift):
    """S(s, t) of a level-2 lift."""
    return path_window(lift.prefix_S, lift.resolution, label=f"S[{lift.kind}]")


def iterated_window(lift):
    """𝕊(s, t) of a level-2 lift (not additive; homogeneity degree 2)."""
    flat = lift.prefix_S
    speed = float(np.max(np.linalg.norm(np.diff(flat, axis=0), axis=1))) * lift.resolution
    if lift.gamma is not None and np.any(lift.gamma != 0):
        # The (t - s) Gamma term is linear in the span; sub-mesh bounds do not cover it.
        speed = None
    return Window(lift.iterated_idx, lift.n_points, float(lift.resolution), False, 2, speed,
                  None, f"A[{lift.kind}]")


def function_window(fn, n_points, resolution, label="window"):
    """A general (non-additive) window function given by ``fn(i, j)``."""
    return Window(fn, int(n_points), float(resolution), False, 1, None, None, label)


def difference_window(a, b, label=None):
    """Window of V_a - V_b for two windows on the same mesh."""
    if a.n_points != b.n_points or a.resolution != b.resolution:
        raise ConfigurationError("windows live on different meshes")
    if a.additive and b.additive:
        return path_window(a.values - b.values, a.resolution, label or f"{a.label}-{b.label}")
    return Window(lambda i, j: a.fn(i, j) - b.fn(i, j), a.n_points, a.resolution, False,
                  max(a.level, b.level), None, None, label or f"{a.label}-{b.label}")


@dataclass
class SeminormReport:
    """Value of a seminorm plus the data that reproduces it."""

    value: float
    kind: str
    parameter: float
    interval: tuple
    witness: object
    grid_size: int
    stride: int
    N: float = None
    h: float = None

    def to_json(self):
        return json.dumps(asdict(self), default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


# -- the span profile -------------------------------------------------------


def _index_range(V, interval):
    if interval is None:
        return 0, V.n_points - 1
    s, t = float(interval[0]), float(interval[1])
    if not t > s:
        raise DegenerateInputError(f"empty interval [{s}, {t}]")
    lo = max(0, int(math.ceil(s * V.resolution - 1e-9)))
    hi = min(V.n_points - 1, int(math.floor(t * V.resolution + 1e-9)))
    if hi - lo < 1:
        raise DegenerateInputError(f"interval [{s}, {t}] holds fewer than two mesh points")
    return lo, hi


def _subsample(lo, hi):
    stride = max(1, -(-(hi - lo) // G_MAX))
    idx = np.arange(lo, hi + 1, stride)
    return idx, stride


def span_profile(V, interval=None):
    """Largest |V| per span on the (subsampled) mesh of ``interval``.

    Returns ``(idx, stride, best, arg)`` where ``best[k]`` is the largest
    magnitude over pairs (idx[i], idx[i + k]) and ``arg[k]`` the smallest
    such i; entry 0 is unused.
    """
    lo, hi = _index_range(V, interval)
    key = (lo, hi)
    if key not in V._profiles:
        idx, stride = _subsample(lo, hi)
        G = len(idx)
        best = np.zeros(G)
        arg = np.zeros(G, dtype=np.int64)
        for k in range(1, G):
            mag = V.magnitude(idx[:-k], idx[k:])
            a = int(np.argmax(mag))
            best[k], arg[k] = mag[a], a
        if not np.all(np.isfinite(best)):
            raise ConfigurationError(f"non-finite window values in {V.label}")
        V._profiles[key] = (idx, stride, best, arg)
    return V._profiles[key]


def _scan(V, beta, interval, N=None, h=None, kind="holder"):
    if not 0 < beta <= 1.5:
        raise ConfigurationError(f"exponent must lie in (0, 3/2], got {beta}")
    idx, stride, best, arg = span_profile(V, interval)
    G = len(idx)
    spans = np.arange(G) * (stride / V.resolution)
    den = spans ** beta
    if N is not None:
        den = np.maximum(den, float(N) ** (-beta))
    ratio = np.zeros(G)
    ratio[1:] = best[1:] / den[1:]
    if h is not None:
        ratio[1:][spans[1:] > h * (1 + _SPAN_SLACK)] = -np.inf
    interval = (idx[0] / V.resolution, idx[-1] / V.resolution)
    if G < 2 or np.all(ratio[1:] == -np.inf):
        return None, interval, stride, G
    k = 1 + int(np.argmax(ratio[1:]))
    top = ratio[k]
    # Lexicographic tie-break on (u, v) among spans reaching the maximum.
    ties = [kk for kk in range(1, G) if ratio[kk] == top]
    k = min(ties, key=lambda kk: (arg[kk], kk))
    i = int(idx[arg[k]])
    j = int(idx[arg[k] + k])
    witness = (i / V.resolution, j / V.resolution)
    return SeminormReport(float(top), kind, float(beta), interval, witness, G, stride,
                          None if N is None else float(N), h), interval, stride, G


def holder(V, beta, interval=None):
    """sup |V(u,v)| / |v - u|^beta over ordered mesh pairs in ``interval``."""
    report, *_ = _scan(V, beta, interval)
    return report


def modified_holder(V, beta, N, interval=None):
    """sup |V(u,v)| / max(|v - u|^beta, N^-beta)."""
    if not N > 0:
        raise ConfigurationError(f"N must be positive, got {N}")
    report, *_ = _scan(V, beta, interval, N=N, kind="modified_holder")
    return report


def windowed_holder(V, beta, h, N=None, interval=None):
    """Hölder seminorm restricted to pairs with v - u <= h.

    For h below the sampling mesh the value is that of the piecewise-linear
    interpolant: ``speed^level h^level / level!`` over the (modified)
    denominator at span h, which is exact for interpolated paths and an
    upper bound for their iterated integrals.
    """
    if not h > 0:
        raise ConfigurationError(f"window h must be positive, got {h}")
    report, interval_used, stride, G = _scan(V, beta, interval, N=N, h=h, kind="windowed")
    mesh = stride / V.resolution
    if h < mesh * (1 - _SPAN_SLACK):
        if V.mesh_speed is None:
            raise ConfigurationError(f"window h={h} is below the mesh {mesh} and {V.label!r} has no interpolant")
        den = h ** beta if N is None else max(h ** beta, float(N) ** (-beta))
        value = (V.mesh_speed * h) ** V.level / math.factorial(V.level) / den
        return SeminormReport(float(value), "windowed", float(beta), interval_used,
                              "sub-mesh interpolant", G, stride, None if N is None else float(N), h)
    return report


# -- p-variation --------------------------------------------------------------


def p_variation_values(x, p):
    """Exact p-variation of the sampled path ``x`` over partitions on its samples.

    dp[i] = max_{j<i} dp[j] + |x_i - x_j|^p; returns (value, breakpoint indices).
    """
    if not p >= 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    x = np.asarray(x, dtype=float)
    flat = x.reshape(len(x), -1)
    G = len(flat)
    if G < 2:
        raise DegenerateInputError("p-variation needs at least two samples")
    dp = np.zeros(G)
    back = np.zeros(G, dtype=np.int64)
    for i in range(1, G):
        d = flat[:i] - flat[i]
        w = np.sqrt(np.einsum("ij,ij->i", d, d)) ** p
        cand = dp[:i] + w
        j = int(np.argmax(cand))
        dp[i], back[i] = cand[j], j
    parts = [G - 1]
    while parts[-1] != 0:
        parts.append(int(back[parts[-1]]))
    return float(dp[-1] ** (1.0 / p)), parts[::-1]


def p_variation(V, p, interval=None):
    """p-variation of an additive window (path increments) on its mesh."""
    if not V.additive:
        raise ContractViolation(f"p-variation is defined for path increments only; {V.label!r} is not additive")
    lo, hi = _index_range(V, interval)
    idx, stride = _subsample(lo, hi)
    value, parts = p_variation_values(V.values[idx], p)
    witness = [float(idx[k] / V.resolution) for k in parts]
    return SeminormReport(value, "p_variation", float(p), (idx[0] / V.resolution, idx[-1] / V.resolution),
                          witness, len(idx), stride)


# -- the comparison device ----------------------------------------------------


@dataclass
class NormComparison:
    """||V||_{alpha,N} against max(N^{-(beta-alpha)gamma} ||V||_{beta,N}, N^{gamma alpha} ||V||_p)."""

    lhs: float
    holder_branch: float
    variation_branch: float
    rhs: float
    slack: float
    satisfied: bool
    params: dict


def norm_comparison(V, alpha, beta, gamma, N, p, interval=None):
    """Bound the modified alpha-norm by a beta-norm branch and a p-variation branch.

    Pairs closer than N^-gamma are charged to the beta-norm, the rest to a
    single p-variation term; the split needs 0 < gamma <= 1 so that pairs
    inside one mesh cell fall in the first branch.
    """
    if not (1 / 3 < alpha < beta < 1 / 2):
        raise ConfigurationError(f"need 1/3 < alpha < beta < 1/2, got alpha={alpha}, beta={beta}")
    if not 0 < gamma <= 1:
        raise ConfigurationError(f"need 0 < gamma <= 1, got {gamma}")
    lhs = modified_holder(V, alpha, N, interval).value
    hb = N ** (-(beta - alpha) * gamma) * modified_holder(V, beta, N, interval).value
    vb = N ** (gamma * alpha) * p_variation(V, p, interval).value
    rhs = max(hb, vb)
    params = dict(alpha=alpha, beta=beta, gamma=gamma, N=N, p=p)
    return NormComparison(lhs, hb, vb, rhs, rhs - lhs, bool(lhs <= rhs * (1 + 1e-9)), params)
