"""Fast-scale semi-implicit Euler chain with frozen slow component.

One step with effective step size tau advances

    y' = R_tau (y + tau * G(x, y) + sqrt(tau) * zeta),

where R_tau = (I - tau * B)^{-1} acts mode by mode and zeta has iid standard
normal modes.  The resolvent multiplies the noise as well as the drift; the
linear-case stationary variance v = a^2 (v + tau) below encodes exactly this
operator placement.

With g = 0 each mode is an AR(1) recursion y_k' = a_k (y_k + sqrt(tau) z),
a_k = 1/(1 + tau mu_k), whose closed-form laws serve as oracles throughout
the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSpec
from .noise import NoiseIncrement, NoiseStreamKey, draw_increments
from .spectral import OperatorSpec, grid_points, to_grid, to_spectral

__all__ = [
    "MicroState",
    "MicroRunResult",
    "micro_step",
    "step_replicas",
    "contraction_factor",
    "stationary_variance_linear",
    "discrete_stationary_variances",
    "run_micro",
]

# draw noise for at most this many steps at a time when batching long chains
_CHUNK_STEPS = 32768


@dataclass(frozen=True)
class MicroState:
    """Fast-chain state: current y, frozen slow field, step size, step count."""

    y: np.ndarray
    frozen_x: np.ndarray
    tau: float
    step_index: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.y.shape[-1] != self.frozen_x.shape[-1]:
            raise ValueError("y and frozen_x must share the mode count")


def step_replicas(
    y: np.ndarray,
    x_grid: np.ndarray,
    xi: np.ndarray,
    increment: np.ndarray,
    resolvent_mult: np.ndarray,
    tau: float,
    coeffs: CoefficientSpec,
) -> np.ndarray:
    """One fast step applied to a (..., K) stack of fields in lock step.

    ``increment`` is the sqrt(tau)-scaled normal block, ``resolvent_mult``
    the precomputed per-mode factors 1/(1 + tau mu_k).  This is the single
    code path every fast-chain consumer steps through.
    """
    if coeffs.has_g:
        gval = coeffs.g(xi, x_grid, to_grid(y))
        return resolvent_mult * (y + tau * to_spectral(gval) + increment)
    return resolvent_mult * (y + increment)


def micro_step(
    state: MicroState,
    noise: NoiseIncrement,
    coeffs: CoefficientSpec,
    op_b: OperatorSpec,
) -> MicroState:
    """Advance the fast chain by one step of size ``state.tau``.

    ``noise`` must be an increment over dt = tau (i.e. sqrt(tau) times a
    standard normal block).
    """
    K = state.y.shape[-1]
    if noise.coeffs.shape[-1] != K or op_b.mode_count != K:
        raise ValueError("mode-count mismatch between state, noise and operator")
    if abs(noise.dt - state.tau) > 1e-12 * max(state.tau, 1.0):
        raise ValueError(
            f"noise increment has dt={noise.dt}, expected the chain step tau={state.tau}"
        )
    res = 1.0 / (1.0 + state.tau * op_b.eigenvalues)
    y_new = step_replicas(
        state.y, to_grid(state.frozen_x), grid_points(K), noise.coeffs, res,
        state.tau, coeffs,
    )
    return MicroState(
        y=y_new, frozen_x=state.frozen_x, tau=state.tau, step_index=state.step_index + 1
    )


def contraction_factor(tau: float, lipschitz_g: float, mu: float) -> float:
    """Per-step squared-distance contraction rho = (1+tau L)/(1+tau(2mu-L)).

    Requires strict dissipativity L < mu; two chains driven by the same noise
    satisfy |y1' - y2'|^2 <= rho |y1 - y2|^2 pathwise.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if lipschitz_g < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    if lipschitz_g >= mu:
        raise ValueError(
            f"strict dissipativity violated: L_g={lipschitz_g} >= mu={mu}"
        )
    return (1.0 + tau * lipschitz_g) / (1.0 + tau * (2.0 * mu - lipschitz_g))


def stationary_variance_linear(mode: int, tau: float, op_b: OperatorSpec) -> float:
    """Stationary variance of mode k for the g = 0 chain: 1/(2 mu_k + tau mu_k^2).

    Fixed point of v = a^2 (v + tau) with a = 1/(1 + tau mu_k); tends to the
    invariant variance 1/(2 mu_k) of the continuous chain as tau -> 0.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not 1 <= mode <= op_b.mode_count:
        raise ValueError(f"mode {mode} outside 1..{op_b.mode_count}")
    mu = float(op_b.eigenvalues[mode - 1])
    return 1.0 / (2.0 * mu + tau * mu**2)


def discrete_stationary_variances(tau: float, op_b: OperatorSpec) -> np.ndarray:
    """All-mode version of :func:`stationary_variance_linear`."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    mu = op_b.eigenvalues
    return 1.0 / (2.0 * mu + tau * mu**2)


@dataclass(frozen=True)
class MicroRunResult:
    """Endpoint and window statistics of a fast-chain run.

    ``f_window_mean`` is the spectral average of F(frozen_x, Y_m) over the
    window m = warmup..steps (None when the window is empty).  Mode moments,
    when requested, average the raw and squared mode coefficients over the
    same window.
    """

    state: MicroState
    f_window_mean: np.ndarray | None
    window_size: int
    mode_mean: np.ndarray | None = None
    mode_second_moment: np.ndarray | None = None


def run_micro(
    y0: np.ndarray,
    frozen_x: np.ndarray,
    steps: int,
    key: NoiseStreamKey,
    coeffs: CoefficientSpec,
    op_b: OperatorSpec,
    tau: float,
    warmup: int = 1,
    track_mode_moments: bool = False,
) -> MicroRunResult:
    """Run the fast chain ``steps`` steps and average F over m >= warmup.

    Noise for step m (0-based) comes from ``key.advanced(m)``, so the run is
    a pure function of the key; batched draws reproduce per-step draws bit
    for bit.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if warmup < 1:
        raise ValueError("warmup must be >= 1: the window must exclude the initial state")
    K = y0.shape[-1]
    if frozen_x.shape[-1] != K or op_b.mode_count != K:
        raise ValueError("mode-count mismatch")

    xi = grid_points(K)
    x_grid = to_grid(frozen_x)
    res = 1.0 / (1.0 + tau * op_b.eigenvalues)

    y = np.array(y0, dtype=float)
    f_sum = np.zeros(K)
    mode_sum = np.zeros(K) if track_mode_moments else None
    mode_sq_sum = np.zeros(K) if track_mode_moments else None
    count = 0

    done = 0
    while done < steps:
        n_chunk = min(_CHUNK_STEPS, steps - done)
        z = draw_increments(key.advanced(done), tau, K, n_chunk)
        for i in range(n_chunk):
            y = step_replicas(y, x_grid, xi, z[i], res, tau, coeffs)
            m = done + i + 1
            if m >= warmup:
                f_sum += coeffs.f(xi, x_grid, to_grid(y))
                count += 1
                if track_mode_moments:
                    mode_sum += y
                    mode_sq_sum += y * y
        done += n_chunk

    state = MicroState(y=y, frozen_x=np.asarray(frozen_x, float), tau=tau, step_index=steps)
    if count == 0:
        return MicroRunResult(state=state, f_window_mean=None, window_size=0)
    return MicroRunResult(
        state=state,
        f_window_mean=to_spectral(f_sum / count),
        window_size=count,
        mode_mean=None if mode_sum is None else mode_sum / count,
        mode_second_moment=None if mode_sq_sum is None else mode_sq_sum / count,
    )
