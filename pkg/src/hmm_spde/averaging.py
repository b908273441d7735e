"""Averaged reaction coefficient and the deterministic averaged scheme.

The fast chain with frozen slow component has a Gaussian invariant law in two
cases the suite relies on:

* g = 0: per-mode variances 1/(2 mu_k);
* g = -c y: per-mode variances 1/(2 (mu_k + c)).

For a Nemytskii f the averaged coefficient at a grid point is then a
one-dimensional Gaussian expectation,

    fbar(x)(xi) = E[ f(xi, x(xi), Z) ],   Z ~ N(0, sigma^2(xi)),

with sigma^2(xi) = sum_k 2 sin^2(k pi xi) var_k, evaluated here by
Gauss-Hermite quadrature.  The averaged coefficient of a Nemytskii pair is
not itself a Nemytskii operator in general, which is why everything works
pointwise on the grid.  For a nonlinear g there is no closed form and the
sampled estimator (a long fast-chain time average) is the fallback.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .coefficients import CoefficientSpec
from .micro import discrete_stationary_variances, run_micro
from .noise import NoiseStreamKey
from .spectral import (
    OperatorSpec,
    grid_points,
    implicit_euler_step,
    to_grid,
    to_spectral,
)

__all__ = [
    "InvariantMeasureSpec",
    "gaussian_nu",
    "gaussian_shifted",
    "gaussian_discrete",
    "pointwise_variance",
    "fbar_gaussian",
    "FbarSampled",
    "fbar_sampled",
    "AveragedState",
    "averaged_step",
    "run_averaged",
    "ReferenceSolution",
    "reference_solution",
    "make_gaussian_fbar",
]

DEFAULT_QUAD_ORDER = 40

FbarProvider = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InvariantMeasureSpec:
    """Product-Gaussian invariant law of the fast chain, one variance per mode."""

    kind: str  # gaussian_nu | gaussian_shifted | gaussian_discrete | sampled
    mode_variances: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.mode_variances, dtype=float)
        if (v < 0).any():
            raise ValueError("mode variances must be nonnegative")
        object.__setattr__(self, "mode_variances", v)

    @property
    def is_gaussian(self) -> bool:
        return self.kind in ("gaussian_nu", "gaussian_shifted", "gaussian_discrete")


def gaussian_nu(op_b: OperatorSpec) -> InvariantMeasureSpec:
    """Invariant law for g = 0: centered Gaussian with variances 1/(2 mu_k)."""
    return InvariantMeasureSpec(
        kind="gaussian_nu", mode_variances=1.0 / (2.0 * op_b.eigenvalues)
    )


def gaussian_shifted(op_b: OperatorSpec, c: float) -> InvariantMeasureSpec:
    """Invariant law for g = -c y: variances 1/(2 (mu_k + c))."""
    if c < 0:
        raise ValueError("drift coefficient must be nonnegative")
    return InvariantMeasureSpec(
        kind="gaussian_shifted", mode_variances=1.0 / (2.0 * (op_b.eigenvalues + c))
    )


def gaussian_discrete(op_b: OperatorSpec, tau: float) -> InvariantMeasureSpec:
    """Equilibrium law of the g = 0 chain at step tau: variances
    1/(2 mu_k + tau mu_k^2); the tau -> 0 limit is :func:`gaussian_nu`."""
    return InvariantMeasureSpec(
        kind="gaussian_discrete",
        mode_variances=discrete_stationary_variances(tau, op_b),
    )


def pointwise_variance(measure: InvariantMeasureSpec, xi, K: int | None = None):
    """Variance of the invariant field at location(s) xi:
    sigma^2(xi) = sum_k 2 sin^2(k pi xi) var_k, truncated at K modes."""
    if not measure.is_gaussian:
        raise ValueError("pointwise variance needs a Gaussian measure")
    v = measure.mode_variances
    if K is not None:
        if K > v.size:
            raise ValueError(f"K={K} exceeds the {v.size} stored mode variances")
        v = v[:K]
    k = np.arange(1, v.size + 1, dtype=float)
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    s2 = (2.0 * np.sin(np.outer(xi_arr, k) * np.pi) ** 2 @ v)
    return float(s2[0]) if np.isscalar(xi) else s2


@lru_cache(maxsize=8)
def _hermgauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _quadrature_average(spec, x, xi, sigma, nodes, weights):
    x_grid = to_grid(x)
    # y-samples per (grid point, node): sqrt(2) sigma_i t_q
    y_nodes = np.sqrt(2.0) * sigma[:, None] * nodes[None, :]
    vals = spec.f(xi[:, None], x_grid[:, None], y_nodes)
    avg = (vals @ weights) / np.sqrt(np.pi)
    return to_spectral(avg)


def fbar_gaussian(
    spec: CoefficientSpec,
    x: np.ndarray,
    measure: InvariantMeasureSpec,
    quad_order: int = DEFAULT_QUAD_ORDER,
) -> np.ndarray:
    """Averaged coefficient under a product-Gaussian invariant law.

    Integrates f(xi_i, x(xi_i), .) against N(0, sigma^2(xi_i)) at every grid
    point with Gauss-Hermite quadrature, then transforms to coefficients.
    """
    if not measure.is_gaussian:
        raise ValueError(
            "quadrature averaging needs a Gaussian measure; use fbar_sampled instead"
        )
    K = x.shape[-1]
    xi = grid_points(K)
    sigma = np.sqrt(pointwise_variance(measure, xi, K=min(K, measure.mode_variances.size)))
    nodes, weights = _hermgauss(quad_order)
    return _quadrature_average(spec, x, xi, sigma, nodes, weights)


@dataclass(frozen=True)
class FbarSampled:
    """Sampled averaged coefficient with per-grid-point standard errors."""

    field: np.ndarray
    grid_values: np.ndarray
    grid_stderr: np.ndarray
    window: int


def fbar_sampled(
    spec: CoefficientSpec,
    x: np.ndarray,
    op_b: OperatorSpec,
    tau: float,
    window: int,
    key: NoiseStreamKey,
    warmup: int | None = None,
    batches: int = 32,
    y0: np.ndarray | None = None,
) -> FbarSampled:
    """Estimate the averaged coefficient by a long single-chain time average.

    Splits the window into ``batches`` consecutive batches and reports the
    batch-means standard error per grid point; the batch length should exceed
    the chain's correlation time ~ (1 + tau mu_1)/(tau mu_1) steps.
    """
    if window < 1:
        raise ValueError("window must contain at least one step")
    if batches < 2 or batches > window:
        raise ValueError("need 2 <= batches <= window")
    K = x.shape[-1]
    if warmup is None:
        warmup = max(window // 10, 1)
    per_batch = window // batches
    y = np.zeros(K) if y0 is None else np.array(y0, dtype=float)

    # warm-up: advance without accumulating
    if warmup > 0:
        res = run_micro(y, x, warmup, key, spec, op_b, tau, warmup=warmup)
        y = res.state.y
    offset = warmup

    batch_means = np.empty((batches, K))
    for b in range(batches):
        res = run_micro(
            y, x, per_batch, key.advanced(offset), spec, op_b, tau, warmup=1
        )
        y = res.state.y
        batch_means[b] = to_grid(res.f_window_mean)
        offset += per_batch

    grid_mean = batch_means.mean(axis=0)
    grid_stderr = batch_means.std(axis=0, ddof=1) / np.sqrt(batches)
    return FbarSampled(
        field=to_spectral(grid_mean),
        grid_values=grid_mean,
        grid_stderr=grid_stderr,
        window=per_batch * batches,
    )


@dataclass(frozen=True)
class AveragedState:
    """State of the deterministic averaged scheme."""

    xbar: np.ndarray
    step_index: int
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def averaged_step(
    state: AveragedState, fbar: FbarProvider, op_a: OperatorSpec
) -> AveragedState:
    """One step of the averaged scheme: xbar' = R_dt (xbar + dt * fbar(xbar))."""
    x_new = implicit_euler_step(state.xbar, fbar(state.xbar), state.dt, op_a)
    return AveragedState(xbar=x_new, step_index=state.step_index + 1, dt=state.dt)


def run_averaged(
    x0: np.ndarray,
    fbar: FbarProvider,
    op_a: OperatorSpec,
    dt: float,
    n_steps: int,
) -> np.ndarray:
    """Averaged-scheme trajectory, shape (n_steps + 1, K), row 0 = x0."""
    traj = np.empty((n_steps + 1, x0.shape[-1]))
    traj[0] = x0
    state = AveragedState(xbar=np.asarray(x0, float), step_index=0, dt=dt)
    for n in range(n_steps):
        state = averaged_step(state, fbar, op_a)
        traj[n + 1] = state.xbar
    return traj


@dataclass(frozen=True)
class ReferenceSolution:
    field: np.ndarray
    fine_dt: float
    richardson_gap: float


def reference_solution(
    x0: np.ndarray,
    fbar: FbarProvider,
    op_a: OperatorSpec,
    T: float,
    fine_dt: float,
) -> ReferenceSolution:
    """Fine-step integration of the averaged flow up to time T.

    Also integrates at half the step and reports the endpoint gap (a
    Richardson self-consistency number the caller should compare against the
    errors being measured).
    """
    if fine_dt <= 0 or T <= 0:
        raise ValueError("T and fine_dt must be positive")
    n = int(round(T / fine_dt))
    if abs(n * fine_dt - T) > 1e-9 * T:
        raise ValueError("fine_dt must divide T")
    x_fine = run_averaged(x0, fbar, op_a, fine_dt, n)[-1]
    x_finer = run_averaged(x0, fbar, op_a, fine_dt / 2.0, 2 * n)[-1]
    return ReferenceSolution(
        field=x_finer,
        fine_dt=fine_dt / 2.0,
        richardson_gap=float(np.linalg.norm(x_fine - x_finer)),
    )


def make_gaussian_fbar(
    spec: CoefficientSpec,
    measure: InvariantMeasureSpec,
    quad_order: int = DEFAULT_QUAD_ORDER,
) -> FbarProvider:
    """Bind the quadrature oracle into an fbar provider x -> fbar(x).

    The variance profile and quadrature nodes are fixed per provider, so this
    is the right entry point for time-stepping loops that call the oracle
    once per step.
    """
    if not measure.is_gaussian:
        raise ValueError(
            "quadrature averaging needs a Gaussian measure; use fbar_sampled instead"
        )
    nodes, weights = _hermgauss(quad_order)
    cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def fbar(x: np.ndarray) -> np.ndarray:
        K = x.shape[-1]
        if K not in cache:
            xi = grid_points(K)
            sigma = np.sqrt(
                pointwise_variance(measure, xi, K=min(K, measure.mode_variances.size))
            )
            cache[K] = (xi, sigma)
        xi, sigma = cache[K]
        return _quadrature_average(spec, x, xi, sigma, nodes, weights)

    return fbar
