"""The limiting diffusion Ξ_N driven by the coupled Brownian motion W_N.

Euler steps on the fine mesh carry the extra drift c(x) explicitly.
Milstein steps are germ updates over macro cells,

    Ξ(s + r) = Ξ(s) + sigma(Ξ(s)) W(s, s+r) + (∇sigma sigma)(Ξ(s)) · 𝕎(s, s+r) + b(Ξ(s)) r,

filled densely at every fine point r of the cell. The (t - s) Gamma part of
𝕎 supplies c(x) (t - s), so Milstein never adds c separately.
"""

from dataclasses import dataclass

import numpy as np

from .coefficients import contract_level2, drift_correction, nabla_sigma_sigma
from .errors import BoxExitError, ConfigurationError, EvaluationError
from .grid import TimeGrid
from .lift import lift_brownian

__all__ = ["DiffusionPath", "solve_sde", "solve_sde_batch", "psi_xi_step"]


@dataclass
class DiffusionPath:
    """Ξ_N on the fine mesh of ``grid``; ``macro`` is the Milstein cell in fine steps."""

    grid: TimeGrid
    states: np.ndarray
    x0: np.ndarray
    gamma: np.ndarray
    scheme: str
    macro: int = 1

    @property
    def mesh_states(self):
        return self.states

    @property
    def mesh_resolution(self):
        return self.grid.N * self.grid.substeps

    @property
    def coarse_states(self):
        return self.states[:: self.grid.substeps]


def _check_x0(field, x0, R):
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        x0 = x0[None]
    x0 = np.broadcast_to(x0, (R, field.dim_slow)).copy()
    field.sigma(x0)
    return x0


def _abort(exc, m):
    if isinstance(exc, BoxExitError):
        return BoxExitError(f"diffusion left the box at fine step {m}: {exc}", step=m)
    return EvaluationError(f"diffusion evaluation failed at fine step {m}: {exc}")


def solve_sde_batch(field, dW, gamma, x0, scheme="milstein", prefix_S=None, prefix_A=None,
                    macro=1, resolution=None):
    """Batched solver. ``dW`` has shape (R, n_fine, D).

    Milstein needs the lift prefixes ``prefix_S`` (R, n_fine + 1, D) and
    ``prefix_A`` (R, n_fine + 1, D, D) of the Brownian lift on the same mesh.
    """
    dW = np.asarray(dW, dtype=float)
    R, n, D = dW.shape
    if D != field.dim_noise:
        raise ConfigurationError(f"Brownian dimension {D} != noise dimension {field.dim_noise}")
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    if not np.all(np.isfinite(gamma)):
        raise EvaluationError("gamma must be finite")
    dt = 1.0 / resolution
    X = np.empty((R, n + 1, field.dim_slow))
    X[:, 0] = _check_x0(field, x0, R)
    x = X[:, 0]
    if scheme == "euler":
        for m in range(n):
            try:
                drift = field.b(x) + drift_correction(field, gamma, x)
                x = x + np.einsum("rij,rj->ri", field.sigma(x), dW[:, m]) + drift * dt
                field._check(x)
            except EvaluationError as exc:
                raise _abort(exc, m + 1) from exc
            X[:, m + 1] = x
        return X
    if scheme != "milstein":
        raise ConfigurationError(f"scheme must be 'euler' or 'milstein', got {scheme!r}")
    if prefix_S is None or prefix_A is None:
        raise ConfigurationError("Milstein needs the Brownian lift prefixes")
    macro = int(macro)
    if macro < 1:
        raise ConfigurationError("macro must be a positive number of fine steps")
    r = np.arange(1, macro + 1)
    for c in range(0, n, macro):
        end = min(c + macro, n)
        rr = r[: end - c]
        j = c + rr
        S_c = prefix_S[:, c]
        W = prefix_S[:, j] - S_c[:, None, :]
        A = prefix_A[:, j] - prefix_A[:, c][:, None] - S_c[:, None, :, None] * W[:, :, None, :]
        try:
            sig = field.sigma(x)
            T = nabla_sigma_sigma(field, x)
            inc = (np.einsum("rij,rmj->rmi", sig, W)
                   + contract_level2(T[:, None], A)
                   + field.b(x)[:, None, :] * (rr * dt)[None, :, None])
            block = x[:, None, :] + inc
            field._check(block)
        except EvaluationError as exc:
            raise _abort(exc, c + 1) from exc
        X[:, c + 1:end + 1] = block
        x = block[:, -1]
    return X


def solve_sde(field, noise, gamma=None, x0=0.0, scheme="milstein", macro=None, lift=None,
              quadratic_variation="empirical"):
    """Integrate Ξ_N on the coupled noise's fine mesh.

    ``gamma`` defaults to the coupling's exact Gamma. Milstein macro cells
    default to one coarse cell (``substeps`` fine steps); ``lift`` may be
    a precomputed Brownian lift with the same Gamma.
    """
    grid = noise.grid
    if grid.substeps < 1 or noise.brownian_increments is None:
        raise ConfigurationError("solve_sde needs fine Brownian increments")
    gamma = noise.gamma if gamma is None else np.atleast_2d(np.asarray(gamma, dtype=float))
    res = grid.N * grid.substeps
    macro = grid.substeps if macro is None else int(macro)
    if scheme == "milstein":
        if lift is None:
            lift = lift_brownian(noise, gamma, quadratic_variation)
        elif not np.allclose(lift.gamma, gamma):
            raise ConfigurationError("lift Gamma differs from the requested Gamma")
        X = solve_sde_batch(field, noise.brownian_increments[None], gamma, x0, scheme,
                            lift.prefix_S[None], lift.prefix_A[None], macro, res)[0]
    else:
        X = solve_sde_batch(field, noise.brownian_increments[None], gamma, x0, scheme,
                            resolution=res)[0]
        macro = 1
    return DiffusionPath(grid, X, X[0].copy(), gamma, scheme, macro)


def psi_xi_step(field, brownian_lift, state, s, t):
    """Ξ-side germ sigma(Ξ(s)) W(s,t) + (∇sigma sigma)(Ξ(s)) · 𝕎(s,t) + b(Ξ(s)) (t - s)."""
    x = np.asarray(state, dtype=float)
    W = brownian_lift.increment(s, t)
    A = brownian_lift.iterated(s, t)
    return (field.sigma(x) @ W + contract_level2(nabla_sigma_sigma(field, x), A)
            + field.b(x) * (float(t) - float(s)))
