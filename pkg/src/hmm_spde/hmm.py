"""Coarse/fine multiscale driver with on-the-fly averaging.

One macro step freezes the slow field X_n, advances M replica fast chains
m0 = n_T + N - 1 micro steps from their carried states, averages the slow
reaction over the window m = n_T..m0 and all replicas,

    Ftilde_n = (1/(M N)) sum_j sum_{m=n_T}^{n_T+N-1} F(X_n, Y_{n,m,j}),

and advances the slow field with the semi-implicit Euler step
X_{n+1} = S_dt (X_n + dt * Ftilde_n).  Carried states Y_{n+1,0,j} = Y_{n,m0,j}
keep each replica chain a single concatenated noise process: the noise block
of micro step m inside macro step n sits at global position n*m0 + m of
replica j's stream, so macro step n only ever reads blocks with macro index n.

Parameter selection follows the tolerance calculus: with target error tol and
exponent margins r, kappa,

    dt  ~ tol^{1/(1-r)},        tau ~ tol^{1/(1/2-kappa)},

and the remaining knobs split by regime.  Strong (trajectory) accuracy with
M = 1 needs a window N ~ tol^{-2 + 1/(1-r) - 1/(1/2-kappa)} (or, with N = 1,
M ~ tol^{1/(1-r)-2} replicas); weak (law) accuracy is insensitive to M, so
M = N = 1 and only the warm-up n_T ~ log(1/dt)/(c tau) matters.  The micro
work is epsilon-free, which is the whole point: a direct scheme must resolve
delta t = epsilon * tau' and its cost grows like 1/epsilon.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .coefficients import (
    CoefficientSpec,
    check_strict_dissipativity,
    check_weak_dissipativity,
)
from .micro import contraction_factor, step_replicas
from .noise import derive_key, draw_increments
from .spectral import OperatorSpec, grid_points, implicit_euler_step, to_grid, to_spectral

__all__ = [
    "HmmParams",
    "HmmState",
    "CostReport",
    "HmmRun",
    "estimate_ftilde",
    "macro_step",
    "run_hmm",
    "choose_params",
    "cost_compare",
]


@dataclass(frozen=True)
class HmmParams:
    """Scheme parameters; tau, n_0 and m_0 are derived.

    n_T >= 1 is enforced: the averaging window must not include the carried
    state before any step of the current macro block has been taken.
    """

    epsilon: float
    macro_dt: float
    micro_dt: float
    T: float
    N: int = 1
    M: int = 1
    n_T: int = 1
    tau_max: float = 1.0

    def __post_init__(self):
        if min(self.epsilon, self.macro_dt, self.micro_dt, self.T) <= 0:
            raise ValueError("epsilon, macro_dt, micro_dt and T must be positive")
        if self.N < 1 or self.M < 1:
            raise ValueError("N and M must be >= 1")
        if self.n_T < 1:
            raise ValueError("n_T must be >= 1")
        if self.tau > self.tau_max:
            raise ValueError(
                f"effective micro step tau={self.tau:.3g} exceeds tau_max={self.tau_max}"
            )

    @property
    def tau(self) -> float:
        return self.micro_dt / self.epsilon

    @property
    def n_0(self) -> int:
        return int(math.floor(self.T / self.macro_dt + 1e-12))

    @property
    def m_0(self) -> int:
        return self.n_T + self.N - 1


@dataclass(frozen=True)
class HmmState:
    X: np.ndarray
    micro_states: np.ndarray  # (M, K) carried fast fields
    n: int
    cost_counter: int


@dataclass(frozen=True)
class CostReport:
    total_micro_steps: int
    cost_per_unit_time: float
    n_macro_steps: int
    replicas: int
    micro_steps_per_macro: int
    # filled by callers that know the target tolerance; see cost_compare
    direct_cost_ratio: float | None = None


@dataclass(frozen=True)
class HmmRun:
    trajectory: np.ndarray  # (n_0 + 1, K)
    cost: CostReport
    final_micro_states: np.ndarray
    params: HmmParams
    seed: int

    @property
    def X_final(self) -> np.ndarray:
        return self.trajectory[-1]


def estimate_ftilde(
    x_frozen: np.ndarray,
    micro_states: np.ndarray,
    params: HmmParams,
    seed: int,
    macro_index: int,
    coeffs: CoefficientSpec,
    op_b: OperatorSpec,
    audit: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance all replicas one macro block and average F over the window.

    Returns (ftilde, updated carried states).  Replicas are advanced in lock
    step on an (M, K) array with a fixed reduction order, so the result does
    not depend on scheduling; each replica's noise comes from its own stream
    at positions macro_index*m0 + 0..m0-1.
    """
    K = x_frozen.shape[-1]
    states = np.asarray(micro_states, dtype=float)
    if states.ndim != 2 or states.shape != (params.M, K):
        raise ValueError(f"micro_states must have shape (M, K) = ({params.M}, {K})")
    tau = params.tau
    m0 = params.m_0

    incr = np.empty((params.M, m0, K))
    audit_blocks = set() if audit else None
    for j in range(1, params.M + 1):
        key = derive_key(seed, macro_index, 0, j, steps_per_macro=m0)
        if audit:
            if key.macro_step != macro_index:
                raise AssertionError("estimator drew a key outside its macro step")
            for m in range(m0):
                block = (key.replica, key.position() + m)
                if block in audit_blocks:
                    raise AssertionError(f"noise block collision at {block}")
                audit_blocks.add(block)
        incr[j - 1] = draw_increments(key, tau, K, m0)

    xi = grid_points(K)
    x_grid = to_grid(x_frozen)
    res = 1.0 / (1.0 + tau * op_b.eigenvalues)
    f_sum = np.zeros(K)
    y = states
    for m in range(1, m0 + 1):
        y = step_replicas(y, x_grid, xi, incr[:, m - 1, :], res, tau, coeffs)
        if m >= params.n_T:
            f_sum += coeffs.f(xi, x_grid, to_grid(y)).sum(axis=0)
    ftilde = to_spectral(f_sum / (params.M * params.N))
    return ftilde, y


def macro_step(state: HmmState, params: HmmParams, ftilde: np.ndarray, op_a: OperatorSpec) -> HmmState:
    """Slow-field update X_{n+1} = S_dt (X_n + dt * Ftilde_n)."""
    x_new = implicit_euler_step(state.X, ftilde, params.macro_dt, op_a)
    return HmmState(
        X=x_new,
        micro_states=state.micro_states,
        n=state.n + 1,
        cost_counter=state.cost_counter,
    )


def _validate_dissipativity(coeffs: CoefficientSpec, op_b: OperatorSpec) -> None:
    strict, _ = check_strict_dissipativity(coeffs, op_b)
    if strict:
        return
    weak = check_weak_dissipativity(coeffs, op_b)
    if weak.holds:
        warnings.warn(
            f"{coeffs.name}: only weak dissipativity holds (L_g >= mu); the fast "
            "chain's invariant law may be non-unique, use weak-error metrics",
            stacklevel=3,
        )
        return
    raise ValueError(
        f"{coeffs.name}: neither strict nor weak dissipativity holds "
        f"(L_g={coeffs.lipschitz_g_y}, sup_g={coeffs.sup_g}, mu={op_b.smallest_eigenvalue})"
    )


def run_hmm(
    x0: np.ndarray,
    y0: np.ndarray,
    coeffs: CoefficientSpec,
    op_a: OperatorSpec,
    op_b: OperatorSpec,
    params: HmmParams,
    seed: int,
    audit: bool = False,
) -> HmmRun:
    """Full multiscale run from (x0, y0) to time n_0 * dt.

    ``y0`` may be a single field (shared by all replicas) or an (M, K) array
    of per-replica initial fast fields.  Deterministic in ``seed``.
    """
    _validate_dissipativity(coeffs, op_b)
    if params.n_0 < 1:
        raise ValueError(
            f"macro step {params.macro_dt} exceeds the horizon T={params.T}; "
            "no steps to take"
        )
    K = x0.shape[-1]
    if op_a.mode_count != K or op_b.mode_count != K:
        raise ValueError("operator mode counts must match the fields")
    y0 = np.asarray(y0, dtype=float)
    if y0.ndim == 1:
        states = np.tile(y0, (params.M, 1))
    else:
        if y0.shape != (params.M, K):
            raise ValueError(f"per-replica y0 must have shape ({params.M}, {K})")
        states = y0.copy()

    n0 = params.n_0
    traj = np.empty((n0 + 1, K))
    traj[0] = x0
    state = HmmState(X=np.asarray(x0, float), micro_states=states, n=0, cost_counter=0)
    for n in range(n0):
        ftilde, new_states = estimate_ftilde(
            state.X, state.micro_states, params, seed, n, coeffs, op_b, audit=audit
        )
        state = HmmState(
            X=implicit_euler_step(state.X, ftilde, params.macro_dt, op_a),
            micro_states=new_states,
            n=n + 1,
            cost_counter=state.cost_counter + params.M * params.m_0,
        )
        traj[n + 1] = state.X

    cost = CostReport(
        total_micro_steps=state.cost_counter,
        cost_per_unit_time=params.M * params.m_0 / params.macro_dt,
        n_macro_steps=n0,
        replicas=params.M,
        micro_steps_per_macro=params.m_0,
    )
    return HmmRun(
        trajectory=traj,
        cost=cost,
        final_micro_states=state.micro_states,
        params=params,
        seed=seed,
    )


def choose_params(
    tol: float,
    epsilon: float,
    regime: str,
    r: float = 0.0,
    kappa: float = 0.0,
    T: float = 1.0,
    c_hat: float | None = None,
    coeffs: CoefficientSpec | None = None,
    op_b: OperatorSpec | None = None,
    strong_branch: str = "M1",
    tau_max: float = 1.0,
) -> HmmParams:
    """Pick (dt, delta t, N, M, n_T) for a target tolerance.

    ``c_hat`` is the exponential equilibration rate entering n_T; when it is
    not given and the coefficients satisfy strict dissipativity it is taken
    from the contraction factor, otherwise it defaults to 1 (a knob, since
    the rate is not explicit under weak dissipativity alone).
    """
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    if regime not in ("strong", "weak"):
        raise ValueError(f"regime must be 'strong' or 'weak', got {regime!r}")
    r_cap = 0.5 if regime == "strong" else 1.0
    if not 0 <= r < r_cap:
        raise ValueError(f"need 0 <= r < {r_cap} in the {regime} regime, got {r}")
    if not 0 <= kappa < 0.5:
        raise ValueError(f"need 0 <= kappa < 1/2, got {kappa}")
    if strong_branch not in ("M1", "N1"):
        raise ValueError("strong_branch must be 'M1' or 'N1'")

    dt = min(tol ** (1.0 / (1.0 - r)), T)
    tau = tol ** (1.0 / (0.5 - kappa))
    if c_hat is None:
        c_hat = 1.0
        if coeffs is not None and op_b is not None:
            strict, _ = check_strict_dissipativity(coeffs, op_b)
            if strict:
                rho = contraction_factor(tau, coeffs.lipschitz_g_y, op_b.smallest_eigenvalue)
                c_hat = -math.log(rho) / (2.0 * tau)

    if regime == "strong":
        n_T = max(1, math.ceil(math.log(1.0 / tol) / (c_hat * tau)))
        if strong_branch == "M1":
            M = 1
            N = max(1, math.ceil(tol ** (-2.0 + 1.0 / (1.0 - r) - 1.0 / (0.5 - kappa))))
        else:
            N = 1
            M = max(1, math.ceil(tol ** (1.0 / (1.0 - r) - 2.0)))
    else:
        M = 1
        N = 1
        # warm-up long enough that exp(-c n_T tau) ~ dt
        n_T = max(1, math.ceil(math.log(1.0 / dt) / (c_hat * tau)))

    return HmmParams(
        epsilon=epsilon,
        macro_dt=dt,
        micro_dt=epsilon * tau,
        T=T,
        N=N,
        M=M,
        n_T=n_T,
        tau_max=tau_max,
    )


def cost_compare(
    params: HmmParams, tol: float, epsilon: float, regime: str, kappa: float = 0.0
) -> float:
    """Micro-step cost per unit time of the multiscale scheme divided by the
    cost of a direct scheme hitting the same tolerance.

    The direct scheme must take delta t with (delta t / epsilon)^q ~ tol where
    q is its order at the relevant accuracy notion (1/4 - kappa strong,
    1/2 - kappa weak in the space-time-white-noise setting), i.e. its cost is
    1/delta t ~ epsilon^{-1} tol^{-1/q}.  The ratio is reported as is; it can
    exceed 1 when epsilon is not small.
    """
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    if regime == "strong":
        q = 0.25 - kappa
    elif regime == "weak":
        q = 0.5 - kappa
    else:
        raise ValueError(f"regime must be 'strong' or 'weak', got {regime!r}")
    if q <= 0:
        raise ValueError(f"kappa={kappa} leaves no accuracy margin in the {regime} regime")
    hmm_cost = params.M * params.m_0 / params.macro_dt
    direct_cost = (1.0 / epsilon) * tol ** (-1.0 / q)
    return hmm_cost / direct_cost
