"""Coefficient fields sigma, b with exact derivatives and declared bounds.

Every field in the catalogue is a *ridge* field: each entry of sigma and b
is an affine image of a scalar profile applied to a linear form in x,

    sigma_ij(x) = c_ij + a_ij * phi(w_ij . x + phase_ij)
    b_i(x)      = e_i  + f_i  * psi(z_i . x + drift_phase_i)

so all derivatives are closed-form and sup-norm bounds over a box follow
from bounds on the profile derivatives. Tensor magnitudes are Frobenius
norms throughout; they dominate every operator norm the estimates use.

Array conventions (``...`` is any batch shape):

    sigma(x)        (..., d, D)
    grad_sigma(x)   (..., d, D, d)        [i, j, l] = d sigma_ij / d x_l
    grad2_sigma(x)  (..., d, D, d, d)
    grad3_sigma(x)  (..., d, D, d, d, d)
    b(x)            (..., d)
    grad_b(x)       (..., d, d)
    grad2_b(x)      (..., d, d, d)
"""

import math

import numpy as np

from .errors import BoxExitError, ConfigurationError, DimensionError, EvaluationError

__all__ = [
    "CoefficientField",
    "FAMILIES",
    "make_field",
    "field_from_config",
    "nabla_sigma_sigma",
    "contract_level2",
    "drift_correction",
    "finite_difference_check",
]


def _linear(u, k):
    if k == 0:
        return u
    if k == 1:
        return np.ones_like(u)
    return np.zeros_like(u)


def _sin(u, k):
    return (np.sin(u), np.cos(u), -np.sin(u), -np.cos(u))[k]


def _cos(u, k):
    return (np.cos(u), -np.sin(u), -np.cos(u), np.sin(u))[k]


def _tanh(u, k):
    t = np.tanh(u)
    s = 1.0 - t * t
    if k == 0:
        return t
    if k == 1:
        return s
    if k == 2:
        return -2.0 * t * s
    return -2.0 * s * (1.0 - 3.0 * t * t)


def _rational(u, k):
    q = 1.0 + u * u
    if k == 0:
        return u / q
    if k == 1:
        return (1.0 - u * u) / q**2
    if k == 2:
        return 2.0 * u * (u * u - 3.0) / q**3
    return -6.0 * (u**4 - 6.0 * u * u + 1.0) / q**4


# Global bounds on |profile^(k)|, k = 0..3; None means "depends on the range".
_PROFILES = {
    "linear": (_linear, (None, 1.0, 0.0, 0.0)),
    "sin": (_sin, (1.0, 1.0, 1.0, 1.0)),
    "cos": (_cos, (1.0, 1.0, 1.0, 1.0)),
    "tanh": (_tanh, (1.0, 1.0, 4.0 / (3.0 * math.sqrt(3.0)), 2.0)),
    "rational": (_rational, (0.5, 1.0, 0.75 + math.sqrt(2.0) / 2.0, 6.0)),
}


def _profile_bound(name, k, u_lo, u_hi):
    bound = _PROFILES[name][1][k]
    if bound is None:
        return np.maximum(np.abs(u_lo), np.abs(u_hi))
    return np.full(np.shape(u_lo), bound)


def _form_range(weights, offset, lo, hi):
    """Range of ``weights . x + offset`` over the box [lo, hi] (last axis is l)."""
    a = weights * lo
    b = weights * hi
    return offset + np.minimum(a, b).sum(-1), offset + np.maximum(a, b).sum(-1)


class CoefficientField:
    """A ridge coefficient field on a declared state box.

    Evaluations outside the box raise :class:`BoxExitError`; evaluations
    that produce non-finite values raise :class:`EvaluationError`.
    ``sup_norms`` holds Frobenius-norm bounds valid on the whole box.
    """

    def __init__(self, c, a, w, phase, e, f, z, drift_phase, profile="linear",
                 drift_profile="linear", box=(-1e3, 1e3), family="ridge", params=None):
        c = np.atleast_2d(np.asarray(c, dtype=float))
        d, D = c.shape
        if D < d:
            raise ConfigurationError(f"noise dimension D={D} must be >= slow dimension d={d}")
        self.dim_slow, self.dim_noise = d, D
        self.c = c
        self.a = np.broadcast_to(np.asarray(a, dtype=float), (d, D)).copy()
        self.w = np.broadcast_to(np.asarray(w, dtype=float), (d, D, d)).copy()
        self.phase = np.broadcast_to(np.asarray(phase, dtype=float), (d, D)).copy()
        self.e = np.broadcast_to(np.asarray(e, dtype=float), (d,)).copy()
        self.f = np.broadcast_to(np.asarray(f, dtype=float), (d,)).copy()
        self.z = np.broadcast_to(np.asarray(z, dtype=float), (d, d)).copy()
        self.drift_phase = np.broadcast_to(np.asarray(drift_phase, dtype=float), (d,)).copy()
        for name in (profile, drift_profile):
            if name not in _PROFILES:
                raise ConfigurationError(f"unknown profile {name!r}; choose from {sorted(_PROFILES)}")
        self.profile, self.drift_profile = profile, drift_profile
        lo, hi = np.broadcast_to(np.asarray(box[0], dtype=float), (d,)), \
            np.broadcast_to(np.asarray(box[1], dtype=float), (d,))
        if np.any(lo >= hi):
            raise ConfigurationError(f"empty state box: lo={lo}, hi={hi}")
        self.box = (lo.copy(), hi.copy())
        self.family = family
        self.params = dict(params or {})
        for arr in (self.c, self.a, self.w, self.phase, self.e, self.f, self.z, self.drift_phase):
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("coefficient parameters must be finite")
        self.sup_norms = self._declare_sup_norms()

    def __repr__(self):
        return (f"CoefficientField(family={self.family!r}, d={self.dim_slow}, "
                f"D={self.dim_noise}, profile={self.profile!r})")

    def _declare_sup_norms(self):
        lo, hi = self.box
        u_lo, u_hi = _form_range(self.w, self.phase, lo, hi)
        v_lo, v_hi = _form_range(self.z, self.drift_phase, lo, hi)
        aa, ff = np.abs(self.a), np.abs(self.f)
        wn = np.linalg.norm(self.w, axis=-1)
        zn = np.linalg.norm(self.z, axis=-1)
        P = lambda k: _profile_bound(self.profile, k, u_lo, u_hi)
        Q = lambda k: _profile_bound(self.drift_profile, k, v_lo, v_hi)
        fro = lambda m: float(np.sqrt(np.sum(m * m)))
        return {
            "sigma": fro(np.abs(self.c) + aa * P(0)),
            "grad_sigma": fro(aa * P(1) * wn),
            "grad2_sigma": fro(aa * P(2) * wn**2),
            "grad3_sigma": fro(aa * P(3) * wn**3),
            "b": fro(np.abs(self.e) + ff * Q(0)),
            "grad_b": fro(ff * Q(1) * zn),
            "grad2_b": fro(ff * Q(2) * zn**2),
        }

    # -- evaluation -------------------------------------------------------

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim_slow,):
            raise DimensionError(f"state must have trailing dimension {self.dim_slow}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise EvaluationError(f"non-finite state x={x}")
        lo, hi = self.box
        if np.any(x < lo) or np.any(x > hi):
            raise BoxExitError(f"state {x} left the box [{lo}, {hi}]")
        return x

    def _u(self, x):
        return np.einsum("ijl,...l->...ij", self.w, x) + self.phase

    def _v(self, x):
        return np.einsum("il,...l->...i", self.z, x) + self.drift_phase

    @staticmethod
    def _finite(out, x):
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"non-finite coefficient value at x={x}")
        return out

    def sigma(self, x):
        x = self._check(x)
        out = self.c + self.a * _PROFILES[self.profile][0](self._u(x), 0)
        return self._finite(out, x)

    def grad_sigma(self, x):
        x = self._check(x)
        g = self.a * _PROFILES[self.profile][0](self._u(x), 1)
        return self._finite(g[..., None] * self.w, x)

    def grad2_sigma(self, x):
        x = self._check(x)
        g = self.a * _PROFILES[self.profile][0](self._u(x), 2)
        ww = self.w[..., :, None] * self.w[..., None, :]
        return self._finite(g[..., None, None] * ww, x)

    def grad3_sigma(self, x):
        x = self._check(x)
        g = self.a * _PROFILES[self.profile][0](self._u(x), 3)
        www = self.w[..., :, None, None] * self.w[..., None, :, None] * self.w[..., None, None, :]
        return self._finite(g[..., None, None, None] * www, x)

    def b(self, x):
        x = self._check(x)
        return self._finite(self.e + self.f * _PROFILES[self.drift_profile][0](self._v(x), 0), x)

    def grad_b(self, x):
        x = self._check(x)
        g = self.f * _PROFILES[self.drift_profile][0](self._v(x), 1)
        return self._finite(g[..., None] * self.z, x)

    def grad2_b(self, x):
        x = self._check(x)
        g = self.f * _PROFILES[self.drift_profile][0](self._v(x), 2)
        zz = self.z[:, :, None] * self.z[:, None, :]
        return self._finite(g[..., None, None] * zz, x)

    def within_bounds(self, x):
        """True if every sampled magnitude at ``x`` is below its declared bound."""
        x = np.asarray(x, dtype=float)
        names = ("sigma", "grad_sigma", "grad2_sigma", "grad3_sigma", "b", "grad_b", "grad2_b")
        core = {"sigma": 2, "grad_sigma": 3, "grad2_sigma": 4, "grad3_sigma": 5,
                "b": 1, "grad_b": 2, "grad2_b": 3}
        for name in names:
            val = getattr(self, name)(x)
            axes = tuple(range(val.ndim - core[name], val.ndim))
            mag = np.sqrt(np.sum(val * val, axis=axes))
            if np.any(mag > self.sup_norms[name] * (1 + 1e-12) + 1e-300):
                return False
        return True


def nabla_sigma_sigma(field, x):
    """Tensor ``T[i, j, k] = sum_l d sigma_ij / d x_l (x) * sigma_lk(x)``."""
    return np.einsum("...ijl,...lk->...ijk", field.grad_sigma(x), field.sigma(x))


def contract_level2(tensor, M):
    """``out[i] = sum_{j,k} tensor[i, j, k] * M[k, j]`` (note the transpose on M)."""
    tensor = np.asarray(tensor, dtype=float)
    M = np.asarray(M, dtype=float)
    if tensor.ndim < 3 or M.ndim < 2 or tensor.shape[-1] != tensor.shape[-2] \
            or M.shape[-2:] != tensor.shape[-2:]:
        raise DimensionError(f"cannot contract tensor {tensor.shape} with matrix {M.shape}")
    return np.einsum("...ijk,...kj->...i", tensor, M)


def drift_correction(field, gamma, x):
    """Extra drift ``c(x)`` induced by the lag-covariance matrix ``gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(gamma)):
        raise EvaluationError("gamma must be finite")
    return contract_level2(nabla_sigma_sigma(field, x), gamma)


def finite_difference_check(field, n_points=100, rtol=1e-5, seed=0):
    """Compare analytic derivatives with central differences at random box points.

    Returns the worst relative error seen; the step is cube-root machine
    epsilon scaled by the coordinate size. Points are drawn from the box
    shrunk so the stencil stays inside.
    """
    rng = np.random.default_rng(seed)
    lo, hi = field.box
    width = hi - lo
    pts = lo + width * (0.05 + 0.9 * rng.random((n_points, field.dim_slow)))
    pairs = [("sigma", "grad_sigma"), ("grad_sigma", "grad2_sigma"),
             ("grad2_sigma", "grad3_sigma"), ("b", "grad_b"), ("grad_b", "grad2_b")]
    eps = np.finfo(float).eps ** (1.0 / 3.0)
    worst = 0.0
    for x in pts:
        for f_name, g_name in pairs:
            f, g = getattr(field, f_name), getattr(field, g_name)
            exact = g(x)
            for l in range(field.dim_slow):
                h = eps * max(1.0, abs(x[l]))
                xp, xm = x.copy(), x.copy()
                xp[l] += h
                xm[l] -= h
                fd = (f(xp) - f(xm)) / (2 * h)
                ex = exact[..., l]
                scale = max(np.max(np.abs(ex)), np.max(np.abs(fd)), 1.0)
                worst = max(worst, float(np.max(np.abs(fd - ex)) / scale))
    return worst


# -- catalogue --------------------------------------------------------------


def _box(params, d):
    box = params.get("box", (-1e3, 1e3))
    return np.broadcast_to(np.asarray(box[0], float), (d,)), np.broadcast_to(np.asarray(box[1], float), (d,))


def _constant(sigma, b=None, box=(-1e3, 1e3)):
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    d, D = sigma.shape
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    return CoefficientField(sigma, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, box=box,
                            family="constant", params={"sigma": sigma.tolist(), "b": b.tolist()})


def _identity(d=1, box=(-1e3, 1e3)):
    return CoefficientField(np.eye(d), 0.0, 0.0, 0.0, np.zeros(d), 0.0, 0.0, 0.0, box=box,
                            family="identity", params={"d": d})


def _linear_family(sigma0, sigma_slope, b0=None, b_slope=None, box=(-1e3, 1e3)):
    sigma0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    d, D = sigma0.shape
    slope = np.asarray(sigma_slope, dtype=float).reshape(d, D, d)
    b0 = np.zeros(d) if b0 is None else np.asarray(b0, dtype=float).reshape(d)
    b_slope = np.zeros((d, d)) if b_slope is None else np.asarray(b_slope, dtype=float).reshape(d, d)
    params = {"sigma0": sigma0.tolist(), "sigma_slope": slope.tolist(),
              "b0": b0.tolist(), "b_slope": b_slope.tolist()}
    return CoefficientField(sigma0, 1.0, slope, 0.0, b0, 1.0, b_slope, 0.0, box=box,
                            family="linear", params=params)


def _trig1d(amplitude=0.3, frequency=1.0, offset=0.5, phase=0.0, drift_amplitude=0.0,
            drift_frequency=1.0, drift_offset=0.0, drift_phase=0.0, box=(-1e3, 1e3)):
    """Scalar field sigma = offset + amplitude sin(freq x + phase), b = b0 + b1 cos(...)."""
    params = dict(amplitude=amplitude, frequency=frequency, offset=offset, phase=phase,
                  drift_amplitude=drift_amplitude, drift_frequency=drift_frequency,
                  drift_offset=drift_offset, drift_phase=drift_phase)
    return CoefficientField([[offset]], amplitude, frequency, phase, drift_offset,
                            drift_amplitude, drift_frequency, drift_phase, profile="sin",
                            drift_profile="cos", box=box, family="trig1d", params=params)


def _ridge(profile, c, a, w, phase=0.0, e=0.0, f=0.0, z=0.0, drift_phase=0.0,
           drift_profile=None, box=(-1e3, 1e3), family=None):
    c = np.atleast_2d(np.asarray(c, dtype=float))
    params = dict(profile=profile, c=c.tolist(), a=np.asarray(a, float).tolist(),
                  w=np.asarray(w, float).tolist(), phase=np.asarray(phase, float).tolist(),
                  e=np.asarray(e, float).tolist(), f=np.asarray(f, float).tolist(),
                  z=np.asarray(z, float).tolist(), drift_phase=np.asarray(drift_phase, float).tolist())
    return CoefficientField(c, a, w, phase, e, f, z, drift_phase, profile=profile,
                            drift_profile=drift_profile or profile, box=box,
                            family=family or profile, params=params)


FAMILIES = {
    "constant": _constant,
    "identity": _identity,
    "linear": _linear_family,
    "trig1d": _trig1d,
    "trig": lambda **kw: _ridge("sin", family="trig", **kw),
    "logistic": lambda **kw: _ridge("tanh", family="logistic", **kw),
    "rational": lambda **kw: _ridge("rational", family="rational", **kw),
    "ridge": _ridge,
}


def make_field(family, **params):
    """Build a catalogue field by name, e.g. ``make_field("trig1d", amplitude=0.3)``."""
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown coefficient family {family!r}; choose from {sorted(FAMILIES)}")
    try:
        return FAMILIES[family](**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for family {family!r}: {exc}") from exc


def field_from_config(block):
    """Build a field from a config block ``{"family": ..., <params>}``."""
    block = dict(block)
    family = block.pop("family", None)
    if family is None:
        raise ConfigurationError("coefficient block needs a 'family' key")
    if "box" in block:
        block["box"] = tuple(block["box"])
    return make_field(family, **block)
