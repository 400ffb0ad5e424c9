"""Capacity, dispersion, exact simulation cost and the normal approximation

All reported quantities are in bits, computations run in nats and are converted at the end.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq
from scipy.special import erfc, rel_entr

from channel_models.channel import Channel
from channel_models.errors import DimensionMismatch, DomainError, NonConvergence
from linear_programs.lp_core import ProgramBuilder, SolverOptions, solve_lp
from linear_programs.zero_error import zero_error_size

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)
MASS_TOL = 1e-9


@dataclass(frozen=True)
class AsymptoticOptions:
    """Knobs of the capacity and dispersion computations

    capacity_tol: stop once max_x D(E(.|x)||q) - I(p) is below this (bits)
    max_iterations: Blahut-Arimoto iteration cap
    stall_window: iterations without the gap halving before the lightest inputs are dropped
    support_factor: inputs with D(E(.|x)||q) >= C - support_factor * tol may carry mass
    face_tol: accepted |sum_x p(x)E(y|x) - q(y)| on the capacity achieving face
    """

    capacity_tol: float = 1e-10
    max_iterations: int = 100_000
    stall_window: int = 1000
    support_factor: float = 10.0
    face_tol: float = 1e-6


@dataclass(frozen=True)
class CapacityResult:
    """Blahut-Arimoto outcome, C in bits with its input and output distributions"""

    C: float
    p_star: NDArray[np.float64]
    q_star: NDArray[np.float64]
    divergences: NDArray[np.float64]
    iterations: int
    residual: float


@dataclass(frozen=True)
class DispersionResult:
    """Smallest information density variance over capacity achieving inputs (bits^2)"""

    V: float
    p_min: NDArray[np.float64]
    support_set: tuple[int, ...]
    capacity: CapacityResult


@dataclass(frozen=True)
class ZeroDispersionFlags:
    """The three equivalent zero dispersion conditions and the values they compare"""

    cond_capacity_eq_alpha: bool
    cond_K0_eq_C: bool
    cond_V_zero: bool
    capacity: float
    log_alpha_star: float
    K0: float
    V: float

    @property
    def consistent(self) -> bool:
        """True when all three conditions agree"""
        flags = {self.cond_capacity_eq_alpha, self.cond_K0_eq_C, self.cond_V_zero}
        return len(flags) == 1


def _divergences(matrix: NDArray[np.float64], q: NDArray[np.float64]) -> NDArray[np.float64]:
    """D(E(.|x) || q) in nats for every input"""
    return np.asarray(rel_entr(matrix, q[np.newaxis, :]).sum(axis=1), dtype=np.float64)


def mutual_information(channel: Channel, p: Sequence[float]) -> float:
    """I(E, p) in bits

    Raises:
        DimensionMismatch: p does not have one entry per input
    """
    dist = np.asarray(p, dtype=np.float64)
    if dist.shape != (channel.input_size,):
        raise DimensionMismatch(f"p needs {channel.input_size} entries, got {dist.shape}")
    q = dist @ channel.matrix
    return float(dist @ _divergences(channel.matrix, q)) / LOG2


def information_density(channel: Channel, q: Sequence[float]) -> NDArray[np.float64]:
    """i(x;y) = log2 E(y|x)/q(y), zero where E(y|x) = 0"""
    output = np.asarray(q, dtype=np.float64)
    if output.shape != (channel.output_size,):
        raise DimensionMismatch(f"q needs {channel.output_size} entries, got {output.shape}")
    positive = channel.matrix > 0
    safe_q = np.where(output > 0, output, 1.0)
    with np.errstate(divide="ignore"):
        density = np.log2(np.where(positive, channel.matrix, 1.0) / safe_q[np.newaxis, :])
    return np.where(positive, density, 0.0)


@dataclass(frozen=True)
class _Iterate:
    """A Blahut-Arimoto point with the capacity bounds it certifies, in nats"""

    p: NDArray[np.float64]
    q: NDArray[np.float64]
    divergence: NDArray[np.float64]
    lower: float
    upper: float
    iterations: int

    @property
    def gap(self) -> float:
        """upper - lower in bits"""
        return (self.upper - self.lower) / LOG2


def _blahut_arimoto(
    matrix: NDArray[np.float64],
    p: NDArray[np.float64],
    active: NDArray[np.bool_],
    tol: float,
    max_iterations: int,
    stall_window: int,
) -> tuple[_Iterate, str]:
    """Blahut-Arimoto updates on the `active` inputs, the upper bound is taken over every input

    Stops with "converged" once the gap is below `tol`, with "excluded" when the active inputs
    have converged among themselves while an inactive input still lifts the upper bound, with
    "stalled" when the gap has not halved in `stall_window` iterations and with "limit" after
    `max_iterations`.
    """
    best = math.inf
    last_progress = 0
    state: _Iterate | None = None
    for iteration in range(1, max_iterations + 1):
        q = p @ matrix
        divergence = _divergences(matrix, q)
        carrying = p > 0
        top = float(divergence[active].max())
        state = _Iterate(
            p=p,
            q=q,
            divergence=divergence,
            lower=float(p[carrying] @ divergence[carrying]),
            upper=float(divergence.max()),
            iterations=iteration,
        )
        if state.gap < tol:
            return state, "converged"
        if (top - state.lower) / LOG2 < tol:
            return state, "excluded"
        if state.gap <= best / 2:
            best = state.gap
            last_progress = iteration
        elif iteration - last_progress >= stall_window:
            return state, "stalled"
        weights = np.zeros_like(p)
        weights[active] = p[active] * np.exp(divergence[active] - top)
        p = weights / weights.sum()
    if state is None:
        raise NonConvergence("Blahut-Arimoto was given no iterations")
    return state, "limit"


def _restricted_runs(
    matrix: NDArray[np.float64], p: NDArray[np.float64], tol: float, budget: int, stall_window: int
) -> tuple[_Iterate | None, int]:
    """Blahut-Arimoto on the k heaviest inputs of `p`, k = |A| - 1 down to 1

    Returns the first run whose bounds over every input meet, with the iterations spent.
    """
    spent = 0
    order = np.argsort(-p, kind="stable")
    for size in range(len(p) - 1, 0, -1):
        if spent >= budget:
            break
        active = np.zeros(len(p), dtype=bool)
        active[order[:size]] = True
        start = np.where(active, p, 0.0)
        state, status = _blahut_arimoto(
            matrix, start / start.sum(), active, tol, budget - spent, stall_window
        )
        spent += state.iterations
        if status == "converged":
            logger.debug("bounds meet with the inputs %s only", np.flatnonzero(active).tolist())
            return state, spent
    return None, spent


def _drop_light_inputs(
    matrix: NDArray[np.float64], state: _Iterate, tol: float, budget: int, stall_window: int
) -> tuple[_Iterate, int]:
    """Rerun a converged iteration without the inputs lighter than sqrt(tol)

    The rerun replaces `state` only when its bounds over every input still meet, so inputs that
    kept a vanishing share of the mass end up with exactly zero.
    """
    active = state.p >= math.sqrt(tol)
    if active.all() or not active.any() or budget < 1:
        return state, 0
    start = np.where(active, state.p, 0.0)
    rerun, status = _blahut_arimoto(matrix, start / start.sum(), active, tol, budget, stall_window)
    if status == "converged":
        logger.debug("inputs %s dropped from the optimal input", np.flatnonzero(~active).tolist())
        return rerun, rerun.iterations
    return state, rerun.iterations


def _capacity_result(state: _Iterate, iterations: int) -> CapacityResult:
    logger.debug("Blahut-Arimoto converged after %d iterations, gap %.3e", iterations, state.gap)
    return CapacityResult(
        C=max(state.lower, 0.0) / LOG2,
        p_star=state.p,
        q_star=state.q,
        divergences=state.divergence / LOG2,
        iterations=iterations,
        residual=max(state.gap, 0.0),
    )


def capacity(
    channel: Channel, tol: float | None = None, options: AsymptoticOptions | None = None
) -> CapacityResult:
    """Channel capacity by Blahut-Arimoto

    Iterates p(x) <- p(x) exp(D(E(.|x)||q)) / Z from the uniform input and stops when the
    upper bound max_x D(E(.|x)||q) and the lower bound I(E, p) are within `tol` bits.

    An input that reaches D(E(.|x)||q) = C while carrying no mass in the optimum makes the gap
    close only sublinearly. Once the gap stops halving for `stall_window` iterations the iteration
    is rerun on the heaviest inputs alone, dropping the lightest one at a time, and the first run
    whose bounds over every input meet is returned. A converged iteration is rerun the same way
    without the inputs lighter than sqrt(tol). p_star is exactly zero on dropped inputs.

    Example:
        ```
        capacity(make_standard("bsc", 0.1)).C  # 0.5310044...
        ```

    Args:
        channel (Channel): channel
        tol (float, optional): gap between the bounds in bits. Defaults to options.capacity_tol.
        options (AsymptoticOptions, optional): iteration cap and tolerances

    Raises:
        DomainError: tol is not positive
        NonConvergence: the gap is still above tol after max_iterations

    Returns:
        CapacityResult: C = I(E, p_star) in bits
    """
    options = options or AsymptoticOptions()
    tol = options.capacity_tol if tol is None else tol
    if tol <= 0:
        raise DomainError(f"capacity tolerance must be positive, got {tol}")
    matrix = channel.matrix
    everything = np.ones(channel.input_size, dtype=bool)
    p = np.full(channel.input_size, 1.0 / channel.input_size)
    gap = math.inf
    used = 0
    while used < options.max_iterations:
        state, status = _blahut_arimoto(
            matrix, p, everything, tol, options.max_iterations - used, options.stall_window
        )
        used += state.iterations
        gap = state.gap
        if status == "converged":
            state, spent = _drop_light_inputs(
                matrix, state, tol, options.max_iterations - used, options.stall_window
            )
            return _capacity_result(state, used + spent)
        if status == "limit":
            break
        logger.debug("Blahut-Arimoto gap stalled at %.3e after %d iterations", gap, used)
        polished, spent = _restricted_runs(
            matrix, state.p, tol, options.max_iterations - used, options.stall_window
        )
        used += spent
        if polished is not None:
            return _capacity_result(polished, used)
        p = state.p
    raise NonConvergence(
        f"Blahut-Arimoto gap {gap:.3e} bits still above {tol:.1e} after "
        f"{options.max_iterations} iterations"
    )


def dispersion(
    channel: Channel,
    tol: float | None = None,
    options: AsymptoticOptions | None = None,
    capacity_result: CapacityResult | None = None,
    solver: SolverOptions | None = None,
) -> DispersionResult:
    """Channel dispersion V, minimized over every capacity achieving input

    On the capacity achieving face D(E(.|x)||q) = C on the support, so the variance of the
    information density reduces to sum_x p(x) Var_{y~E(.|x)}[i(x;y)], which is linear in p. The
    minimum is a small program over the support set S = {x : D(E(.|x)||q) >= C - r}, with
    r = support_factor max(tol, sqrt(residual)) since q_star is only that close to the optimal
    output. The output distribution is held within face_tol of the one p_star induces on S and
    sum_x p(x) D(E(.|x)||q) stays within support_factor tol of C, which keeps inputs short of
    capacity out. The capacity achieving input restricted to S is always feasible there.

    Args:
        channel (Channel): channel
        tol (float, optional): capacity tolerance in bits. Defaults to options.capacity_tol.
        options (AsymptoticOptions, optional): tolerances
        capacity_result (CapacityResult, optional): reuse an earlier capacity computation
        solver (SolverOptions, optional): settings for the small program

    Raises:
        NonConvergence: the face program has no optimum, the capacity result is too coarse

    Returns:
        DispersionResult: V in bits^2 and the minimizing input
    """
    options = options or AsymptoticOptions()
    tol = options.capacity_tol if tol is None else tol
    result = capacity_result or capacity(channel, tol, options)
    matrix = channel.matrix
    density = information_density(channel, result.q_star)
    means = result.divergences
    variances = np.einsum("xy,xy->x", matrix, (density - means[:, np.newaxis]) ** 2)
    variances = np.maximum(variances, 0.0)
    # q_star is only within about sqrt(gap) of the optimal output
    reach = options.support_factor * max(tol, math.sqrt(max(result.residual, 0.0)))
    support = np.flatnonzero(means >= result.C - reach)

    restricted = result.p_star[support]
    if restricted.sum() > 0:
        target = (restricted / restricted.sum()) @ matrix[support]
    else:
        target = result.q_star

    builder = ProgramBuilder("min")
    weights = builder.add_variables("p", len(support), objective=variances[support])
    builder.add_row("norm", weights, 1, "=", 1)
    lower_bound = result.C - options.support_factor * tol
    builder.add_row("capacity", weights, means[support], ">=", lower_bound)
    rows = np.repeat(np.arange(channel.output_size), len(support))
    cols = np.tile(weights, channel.output_size)
    coefficients = matrix[support].T.reshape(-1)
    upper = target + options.face_tol
    lower = np.maximum(target - options.face_tol, 0.0)
    builder.add_rows("face_upper", channel.output_size, rows, cols, coefficients, "<=", upper)
    builder.add_rows("face_lower", channel.output_size, rows, cols, coefficients, ">=", lower)
    solution = solve_lp(builder.build(), "float", solver)
    if not solution.optimal:
        raise NonConvergence(
            f"capacity achieving face program is {solution.status}, "
            f"capacity gap {result.residual:.3e} is too coarse"
        )

    p_min = np.zeros(channel.input_size)
    p_min[support] = np.asarray(solution.variables("p"), dtype=np.float64)
    return DispersionResult(
        V=max(float(solution.objective), 0.0),
        p_min=p_min,
        support_set=tuple(int(x) for x in support),
        capacity=result,
    )


def v0_residual(channel: Channel, result: DispersionResult) -> float:
    """max |E(y|x) - q(y) 2^C| over inputs carrying mass in p_min and outputs with E(y|x) > 0

    The residual vanishes exactly when the channel has zero dispersion. Inputs of the support set
    that the minimizing input leaves out do not enter.
    """
    cap = result.capacity
    target = cap.q_star * 2.0**cap.C
    worst = 0.0
    for x in np.flatnonzero(result.p_min > MASS_TOL):
        positive = channel.matrix[x] > 0
        if positive.any():
            worst = max(worst, float(np.abs(channel.matrix[x, positive] - target[positive]).max()))
    return worst


def exact_simulation_cost(channel: Channel) -> float:
    """K0 = log2 sum_y max_x E(y|x), the NS assisted exact simulation rate"""
    return max(math.log2(float(channel.matrix.max(axis=0).sum())), 0.0)


def q_function(x: float) -> float:
    """Gaussian tail Q(x) = P(N(0,1) > x)"""
    return 0.5 * float(erfc(x / math.sqrt(2.0)))


def q_inv(eps: float) -> float:
    """Inverse of the Gaussian tail, Q(q_inv(eps)) = eps

    Brackets the root with Brent's method and finishes with Newton steps.

    Raises:
        DomainError: eps outside (0, 1)
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"Q^-1 needs eps in (0, 1), got {eps}")
    if eps == 0.5:
        return 0.0
    root = float(brentq(lambda x: q_function(x) - eps, -40.0, 40.0, xtol=1e-15, rtol=1e-15))
    for _ in range(3):
        density = math.exp(-0.5 * root * root) / math.sqrt(2.0 * math.pi)
        if density == 0.0:
            break
        step = (q_function(root) - eps) / density
        root += step
        if abs(step) < 1e-16:
            break
    return root


def normal_approximation(C: float, V: float, n: int, eps: float) -> float:
    """n C - sqrt(n V) Q^-1(eps) in bits

    Raises:
        DomainError: n < 1, V < 0 or eps outside (0, 1)
    """
    if n < 1:
        raise DomainError(f"blocklength must be positive, got {n}")
    if V < 0:
        raise DomainError(f"dispersion must be nonnegative, got {V}")
    return n * C - math.sqrt(n * V) * q_inv(eps)


def zero_dispersion_check(
    channel: Channel,
    tol: float = 1e-6,
    options: AsymptoticOptions | None = None,
    solver: SolverOptions | None = None,
) -> ZeroDispersionFlags:
    """Evaluate the three conditions that hold together exactly for zero dispersion channels

    (1) C = log2 alpha*(H(E)), (2) K0 = C, (3) V = 0, each within `tol`. A disagreement between
    them points at a numerical problem and is logged as a warning.

    Returns:
        ZeroDispersionFlags: the three flags and the compared values
    """
    options = options or AsymptoticOptions()
    spread = dispersion(channel, options=options, solver=solver)
    cap = spread.capacity.C
    log_alpha = math.log2(float(zero_error_size(channel, "float", solver).alpha_star))
    cost = exact_simulation_cost(channel)
    flags = ZeroDispersionFlags(
        cond_capacity_eq_alpha=abs(cap - log_alpha) <= tol,
        cond_K0_eq_C=abs(cost - cap) <= tol,
        cond_V_zero=spread.V <= tol,
        capacity=cap,
        log_alpha_star=log_alpha,
        K0=cost,
        V=spread.V,
    )
    if not flags.consistent:
        logger.warning(
            "zero dispersion conditions disagree: C=%.12g, log2 alpha*=%.12g, K0=%.12g, V=%.3e",
            cap,
            log_alpha,
            cost,
            spread.V,
        )
    return flags
