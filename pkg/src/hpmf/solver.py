"""ADMM solver for hierarchical-prior regularized matrix factorization.

Every mode-n unfolding of the estimate is modelled as ``U_n @ V_n``, with
l1 penalties on first differences (``L U``, ``C V``) and DCT coefficients
(``B U``, ``D V``) of both factors. The splitting introduces auxiliaries
``G = L U``, ``H = C V``, ``R = B U``, ``M = D V`` with scaled duals and
penalty parameters that grow geometrically by ``mu`` each iteration.
Modes are coupled only through the consensus tensor, which pins observed
entries to the data and averages the per-mode reconstructions elsewhere.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    EmptyObservation,
    InvalidConfig,
    NonFinite,
    RankEstimationFailure,
    ShapeMismatch,
    ZeroDenominator,
    ZeroMatrix,
)
from .linalg import soft_threshold, solve_spd, solve_sylvester_spd, svd
from .priors import PriorOperators, estimate_rank
from .tensor_core import fold_mode, frobenius_norm, unfold_mode

log = logging.getLogger(__name__)

PerMode = Union[float, Sequence[float]]

# l1 weights and penalties, respectively; see HpmfConfig.effective
WEIGHT_FIELDS = ("lambda_u", "lambda_v", "rho_u", "rho_v")
PENALTY_FIELDS = ("beta_u0", "beta_v0", "omega_u0", "omega_v0")
PER_MODE_FIELDS = (
    "alpha",
    "lambda_u",
    "lambda_v",
    "rho_u",
    "rho_v",
    "beta_u0",
    "beta_v0",
    "omega_u0",
    "omega_v0",
)


@dataclass
class HpmfConfig:
    """Solver hyperparameters.

    Per-mode parameters accept a scalar (shared by all modes) or one value
    per mode. ``alpha=None`` means uniform weights ``1/N``. Defaults are the
    settings used for color images in the original experiments; ``mu``,
    ``delta`` and ``penalty_cap`` are picked from the admissible ranges.

    The weights and penalties are expressed for intensities measured in
    units of ``1 / intensity_scale`` (8-bit grey levels by default) while
    the data stay in their own units. Scaling data by ``s`` is equivalent
    to dividing the l1 weights by ``s**1.5`` and the penalties (and the
    cap) by ``s``, which is what :meth:`effective` does. Use
    ``intensity_scale=1`` to apply the numbers literally.

    ``aux_init`` chooses the starting auxiliaries: ``"zero"``, or
    ``"product"`` for ``G = L U`` etc. With ``"product"`` and full-rank
    factors the first sweep reproduces the start tensor exactly, so the
    stopping rule fires at once.
    """

    alpha: Optional[PerMode] = None
    lambda_u: PerMode = 100.0
    lambda_v: PerMode = 100.0
    rho_u: PerMode = 0.1
    rho_v: PerMode = 100.0
    beta_u0: PerMode = 1.0
    beta_v0: PerMode = 100.0
    omega_u0: PerMode = 1e-3
    omega_v0: PerMode = 1000.0
    mu: float = 1.02
    penalty_cap: float = 1e8
    max_iters: int = 500
    tol: float = 1e-5
    delta: float = 0.05
    rank_override: Optional[Sequence[int]] = None
    intensity_scale: float = 255.0
    aux_init: str = "zero"
    seed: int = 0

    def per_mode(self, name: str, n_modes: int) -> np.ndarray:
        value = getattr(self, name)
        if name == "alpha" and value is None:
            return np.full(n_modes, 1.0 / n_modes)
        arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
        if arr.size == 1:
            return np.full(n_modes, float(arr[0]))
        if arr.size != n_modes:
            raise InvalidConfig(f"{name} has {arr.size} entries for {n_modes} modes")
        return arr

    def effective(self, name: str, n_modes: int) -> np.ndarray:
        """Per-mode value of `name` converted to data units."""
        value = self.per_mode(name, n_modes)
        if name in WEIGHT_FIELDS:
            return value / self.intensity_scale**1.5
        if name in PENALTY_FIELDS:
            return value / self.intensity_scale
        return value

    @property
    def effective_cap(self) -> float:
        return self.penalty_cap / self.intensity_scale

    def validate(self, n_modes: int) -> None:
        alpha = self.per_mode("alpha", n_modes)
        if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > 1e-12:
            raise InvalidConfig(f"alpha must be nonnegative and sum to 1, got {alpha}")
        for name in ("lambda_u", "lambda_v", "rho_u", "rho_v"):
            if np.any(self.per_mode(name, n_modes) < 0):
                raise InvalidConfig(f"{name} must be nonnegative")
        for name in ("beta_u0", "beta_v0", "omega_u0", "omega_v0"):
            if np.any(self.per_mode(name, n_modes) <= 0):
                raise InvalidConfig(f"{name} must be positive")
        if self.mu < 1:
            raise InvalidConfig(f"mu must be >= 1, got {self.mu}")
        if self.penalty_cap <= 0:
            raise InvalidConfig("penalty_cap must be positive")
        if self.max_iters < 1:
            raise InvalidConfig("max_iters must be >= 1")
        if self.tol <= 0:
            raise InvalidConfig("tol must be positive")
        if self.intensity_scale <= 0:
            raise InvalidConfig("intensity_scale must be positive")
        if self.aux_init not in ("zero", "product"):
            raise InvalidConfig(f"aux_init must be 'zero' or 'product', got {self.aux_init!r}")
        if not 0 < self.delta < 1:
            raise InvalidConfig(f"delta must lie in (0, 1), got {self.delta}")
        if self.rank_override is not None and len(self.rank_override) != n_modes:
            raise InvalidConfig(
                f"rank_override has {len(self.rank_override)} entries for {n_modes} modes"
            )


@dataclass
class ObservationProblem:
    """Ground-truth tensor and the boolean mask of observed entries."""

    original: np.ndarray
    observed_mask: np.ndarray

    def __post_init__(self):
        self.original = np.asarray(self.original, dtype=np.float64)
        self.observed_mask = np.asarray(self.observed_mask, dtype=bool)
        if self.original.shape != self.observed_mask.shape:
            raise ShapeMismatch(
                f"tensor {self.original.shape} and mask {self.observed_mask.shape} differ"
            )
        if not self.observed_mask.any():
            raise EmptyObservation("the observation set is empty")

    @property
    def shape(self):
        return self.original.shape

    @property
    def sampling_ratio(self) -> float:
        return float(self.observed_mask.mean())

    def zero_filled(self) -> np.ndarray:
        return np.where(self.observed_mask, self.original, 0.0)


@dataclass
class ModeState:
    """Factors, auxiliaries, duals and penalties of one mode."""

    u: np.ndarray
    v: np.ndarray
    g: np.ndarray
    h: np.ndarray
    r: np.ndarray
    m: np.ndarray
    lam: np.ndarray
    pi: np.ndarray
    phi: np.ndarray
    gam: np.ndarray
    beta_u: float
    beta_v: float
    omega_u: float
    omega_v: float
    ops: PriorOperators
    rank: int
    lambda_u: float = 0.0
    lambda_v: float = 0.0
    rho_u: float = 0.0
    rho_v: float = 0.0
    alpha: float = 1.0


@dataclass
class TraceRecord:
    iteration: int
    relative_change: float
    objective: float
    wall_seconds: float


@dataclass
class CompletionReport:
    recovered: np.ndarray
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    ranks: tuple = ()


def init_state(problem: ObservationProblem, cfg: HpmfConfig):
    """Zero-filled start tensor and per-mode states from truncated SVDs.

    ``U = U_r sqrt(S_r)`` and ``V = sqrt(S_r) V_r'`` from the rank-r SVD of
    each unfolding; duals start at zero.

    Returns
    -------
    x0 : ndarray
        Observed entries of the data, zeros elsewhere.
    states : list of ModeState
    """
    shape = problem.shape
    n_modes = len(shape)
    cfg.validate(n_modes)
    x0 = problem.zero_filled()

    params = {name: cfg.effective(name, n_modes) for name in PER_MODE_FIELDS}
    states = []
    for n in range(1, n_modes + 1):
        xn = unfold_mode(x0, n)
        max_rank = min(xn.shape)
        if cfg.rank_override is not None:
            rank = int(cfg.rank_override[n - 1])
            if not 1 <= rank <= max_rank:
                raise RankEstimationFailure(f"rank {rank} for mode {n} outside 1..{max_rank}")
        else:
            try:
                rank = estimate_rank(xn, cfg.delta)
            except ZeroMatrix:
                rank = 1
        u_full, s, vt = svd(xn)
        root = np.sqrt(s[:rank])
        u = u_full[:, :rank] * root
        v = root[:, None] * vt[:rank]
        ops = PriorOperators.for_mode(shape[n - 1], rank)
        g, h = ops.tv_u @ u, ops.tv_v @ v
        r, m = ops.dct_u @ u, ops.dct_v @ v
        if cfg.aux_init == "zero":
            g, h, r, m = (np.zeros_like(a) for a in (g, h, r, m))
        i = n - 1
        states.append(
            ModeState(
                u=u,
                v=v,
                g=g,
                h=h,
                r=r,
                m=m,
                lam=np.zeros_like(g),
                pi=np.zeros_like(h),
                phi=np.zeros_like(r),
                gam=np.zeros_like(m),
                beta_u=float(params["beta_u0"][i]),
                beta_v=float(params["beta_v0"][i]),
                omega_u=float(params["omega_u0"][i]),
                omega_v=float(params["omega_v0"][i]),
                ops=ops,
                rank=rank,
                lambda_u=float(params["lambda_u"][i]),
                lambda_v=float(params["lambda_v"][i]),
                rho_u=float(params["rho_u"][i]),
                rho_v=float(params["rho_v"][i]),
                alpha=float(params["alpha"][i]),
            )
        )
    return x0, states


def update_u(state: ModeState, x_unf: np.ndarray, alpha: float) -> np.ndarray:
    """Exact minimizer of the augmented Lagrangian over ``U``.

    The normal equations read ``(beta L'L + omega B'B) U + U (alpha V V') = rhs``,
    a Sylvester equation with symmetric PSD coefficients.
    """
    L, B = state.ops.tv_u, state.ops.dct_u
    v = state.v
    lhs_left = state.beta_u * (L.T @ L) + state.omega_u * (B.T @ B)
    lhs_right = alpha * (v @ v.T)
    rhs = (
        alpha * (x_unf @ v.T)
        + state.beta_u * (L.T @ state.g)
        - L.T @ state.lam
        + state.omega_u * (B.T @ state.r)
        - B.T @ state.phi
    )
    return solve_sylvester_spd(lhs_left, lhs_right, rhs)


def update_v(state: ModeState, x_unf: np.ndarray, alpha: float) -> np.ndarray:
    """Exact minimizer over ``V`` given the freshly updated ``U``.

    ``D`` is orthonormal, so its Gram matrix enters as ``omega * I``.
    """
    C, D = state.ops.tv_v, state.ops.dct_v
    u = state.u
    lhs = alpha * (u.T @ u) + state.beta_v * (C.T @ C) + state.omega_v * np.eye(state.rank)
    rhs = (
        alpha * (u.T @ x_unf)
        + state.beta_v * (C.T @ state.h)
        - C.T @ state.pi
        + state.omega_v * (D.T @ state.m)
        - D.T @ state.gam
    )
    return solve_spd(lhs, rhs)


def update_aux(inp: np.ndarray, dual: np.ndarray, penalty: float, weight: float) -> np.ndarray:
    """Proximal step ``argmin_Y weight*|Y|_1 + penalty/2 * |inp - Y + dual/penalty|_F^2``."""
    if inp.shape != dual.shape:
        raise ShapeMismatch(f"input {inp.shape} and dual {dual.shape} differ")
    return soft_threshold(inp + dual / penalty, weight / penalty)


def update_duals(state: ModeState) -> ModeState:
    """Dual ascent on the four splitting constraints, in place."""
    ops = state.ops
    state.lam = state.lam + state.beta_u * (ops.tv_u @ state.u - state.g)
    state.pi = state.pi + state.beta_v * (ops.tv_v @ state.v - state.h)
    state.phi = state.phi + state.omega_u * (ops.dct_u @ state.u - state.r)
    state.gam = state.gam + state.omega_v * (ops.dct_v @ state.v - state.m)
    return state


StepHook = Callable[[str, int, ModeState, np.ndarray, float], None]


def mode_sweep(
    state: ModeState,
    x_unf: np.ndarray,
    alpha: float,
    mode: int = 0,
    step_hook: Optional[StepHook] = None,
) -> np.ndarray:
    """One pass of the primal and dual updates for a single mode.

    Returns the new unfolding estimate ``U @ V``. When given, `step_hook`
    is called as ``step_hook(step, mode, state, x_unf, alpha)`` before the
    first update (``step="start"``) and after each primal update
    (``"u", "v", "g", "h", "r", "m"``).
    """
    ops = state.ops

    def notify(step):
        if step_hook is not None:
            step_hook(step, mode, state, x_unf, alpha)

    notify("start")
    state.u = update_u(state, x_unf, alpha)
    notify("u")
    state.v = update_v(state, x_unf, alpha)
    notify("v")
    state.g = update_aux(ops.tv_u @ state.u, state.lam, state.beta_u, state.lambda_u)
    notify("g")
    state.h = update_aux(ops.tv_v @ state.v, state.pi, state.beta_v, state.lambda_v)
    notify("h")
    state.r = update_aux(ops.dct_u @ state.u, state.phi, state.omega_u, state.rho_u)
    notify("r")
    state.m = update_aux(ops.dct_v @ state.v, state.gam, state.omega_v, state.rho_v)
    notify("m")
    x_new = state.u @ state.v
    update_duals(state)
    return x_new


def consensus_fold(mode_unfoldings, alpha, problem: ObservationProblem) -> np.ndarray:
    """Data on observed entries, alpha-weighted average of folded estimates elsewhere."""
    shape = problem.shape
    if len(mode_unfoldings) != len(alpha):
        raise ShapeMismatch("one weight per unfolding is required")
    avg = np.zeros(shape)
    for n, (xn, a) in enumerate(zip(mode_unfoldings, alpha), start=1):
        avg += a * fold_mode(xn, n, shape)
    return np.where(problem.observed_mask, problem.original, avg)


def relative_change(x_new, x_old) -> float:
    """``| ||x_new||_F - ||x_old||_F | / ||x_old||_F``.

    This compares norms only, so a permutation of entries scores zero.
    """
    old = frobenius_norm(x_old)
    if old == 0.0:
        raise ZeroDenominator("previous iterate has zero norm")
    return abs(frobenius_norm(x_new) - old) / old


def _l1(a: np.ndarray) -> float:
    return float(np.abs(a).sum())


def objective(problem: ObservationProblem, states, x) -> float:
    """Convex surrogate objective summed over modes (diagnostic)."""
    x = np.asarray(x, dtype=np.float64)
    n_modes = len(states)
    if x.ndim != n_modes:
        raise ShapeMismatch("one state per mode is required")
    total = 0.0
    for n, st in enumerate(states, start=1):
        ops = st.ops
        resid = unfold_mode(x, n) - st.u @ st.v
        total += 0.5 * st.alpha * float(np.sum(resid * resid))
        total += st.lambda_u * _l1(ops.tv_u @ st.u) + st.lambda_v * _l1(ops.tv_v @ st.v)
        total += st.rho_u * _l1(ops.dct_u @ st.u) + st.rho_v * _l1(ops.dct_v @ st.v)
    return total


def lagrangian(state: ModeState, x_unf: np.ndarray, alpha: float) -> float:
    """Augmented Lagrangian of one mode with explicit dual inner products."""
    ops = state.ops
    resid = x_unf - state.u @ state.v
    value = 0.5 * alpha * float(np.sum(resid * resid))
    terms = (
        (state.lambda_u, state.g, state.lam, state.beta_u, ops.tv_u @ state.u),
        (state.lambda_v, state.h, state.pi, state.beta_v, ops.tv_v @ state.v),
        (state.rho_u, state.r, state.phi, state.omega_u, ops.dct_u @ state.u),
        (state.rho_v, state.m, state.gam, state.omega_v, ops.dct_v @ state.v),
    )
    for weight, aux, dual, penalty, product in terms:
        gap = product - aux
        value += weight * _l1(aux)
        value += float(np.sum(dual * gap))
        value += 0.5 * penalty * float(np.sum(gap * gap))
    return value


def _check_finite(state: ModeState, x_n: np.ndarray, mode: int, iteration: int) -> None:
    for name in ("u", "v", "g", "h", "r", "m", "lam", "pi", "phi", "gam"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise NonFinite(f"non-finite {name} in mode {mode} at iteration {iteration}")
    if not np.all(np.isfinite(x_n)):
        raise NonFinite(f"non-finite reconstruction in mode {mode} at iteration {iteration}")


def _grow(value: float, mu: float, cap: float) -> float:
    return max(value, min(mu * value, cap))


def run_hpmf(
    problem: ObservationProblem,
    cfg: Optional[HpmfConfig] = None,
    *,
    parallel: bool = False,
    step_hook: Optional[StepHook] = None,
    iteration_hook: Optional[Callable[[int, np.ndarray, list], None]] = None,
) -> CompletionReport:
    """Complete `problem` by alternating per-mode ADMM sweeps and consensus folding.

    Parameters
    ----------
    problem : ObservationProblem
    cfg : HpmfConfig, optional
        Defaults to ``HpmfConfig()``.
    parallel : bool
        Run the per-mode sweeps in a thread pool. Modes only read the
        shared consensus tensor, so results are identical to the
        sequential path.
    step_hook : callable, optional
        Forwarded to :func:`mode_sweep` (sequential path only).
    iteration_hook : callable, optional
        Called as ``iteration_hook(k, x, states)`` with the consensus tensor
        after every iteration ``k = 1, 2, ...``.

    Returns
    -------
    CompletionReport
    """
    cfg = HpmfConfig() if cfg is None else cfg
    x, states = init_state(problem, cfg)
    n_modes = len(states)
    alpha = cfg.per_mode("alpha", n_modes)
    if parallel and step_hook is not None:
        raise ValueError("step_hook is only supported on the sequential path")

    log.debug("ranks %s", [st.rank for st in states])
    trace = []
    converged = False
    start = time.perf_counter()
    pool = ThreadPoolExecutor(max_workers=n_modes) if parallel else None
    try:
        for k in range(1, cfg.max_iters + 1):

            def sweep(n):
                st = states[n - 1]
                return mode_sweep(st, unfold_mode(x, n), st.alpha, n, step_hook)

            modes = range(1, n_modes + 1)
            if pool is not None:
                unfoldings = list(pool.map(sweep, modes))
            else:
                unfoldings = [sweep(n) for n in modes]
            for n, (st, xn) in enumerate(zip(states, unfoldings), start=1):
                _check_finite(st, xn, n, k)

            x_new = consensus_fold(unfoldings, alpha, problem)
            cap = cfg.effective_cap
            for st in states:
                st.beta_u = _grow(st.beta_u, cfg.mu, cap)
                st.beta_v = _grow(st.beta_v, cfg.mu, cap)
                st.omega_u = _grow(st.omega_u, cfg.mu, cap)
                st.omega_v = _grow(st.omega_v, cfg.mu, cap)

            change = relative_change(x_new, x)
            x = x_new
            trace.append(
                TraceRecord(k, change, objective(problem, states, x), time.perf_counter() - start)
            )
            if iteration_hook is not None:
                iteration_hook(k, x, states)
            if change < cfg.tol:
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()

    log.info("stopped after %d iterations (converged=%s)", len(trace), converged)
    return CompletionReport(
        recovered=x,
        iterations=len(trace),
        converged=converged,
        trace=trace,
        ranks=tuple(st.rank for st in states),
    )
