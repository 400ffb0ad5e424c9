"""Neyman-Pearson tests and the hypothesis testing converse, an independent route to M_beta"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from channel_models.channel import Channel
from channel_models.errors import DimensionMismatch, DomainError, SolverFailure
from linear_programs.lp_core import ProgramBuilder, SolverOptions, solve_lp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BinaryTest:
    """Randomized test, T[r] is the probability of accepting hypothesis 0 on outcome r"""

    T: NDArray[np.float64]


@dataclass(frozen=True)
class BetaResult:
    """Smallest type II error beta with type I error at most eps, and the test reaching it"""

    beta: float
    test: BinaryTest


@dataclass(frozen=True)
class PpvResult:
    """Hypothesis testing converse for one channel use

    mu is the optimum of min_p max_Q beta_{1-eps}(P_XY, P_X x Q_Y), M_ppv = 1/mu, p the optimal
    input and R = p T the optimal test weighted by the input.
    """

    M_ppv: Any
    mu: Any
    p: NDArray[Any]
    R: NDArray[Any]


def _pair(p0: Sequence[float], p1: Sequence[float]) -> tuple[NDArray[np.float64], ...]:
    first = np.asarray(p0, dtype=np.float64)
    second = np.asarray(p1, dtype=np.float64)
    if first.ndim != 1 or first.shape != second.shape:
        raise DimensionMismatch(f"distributions of shapes {first.shape} and {second.shape}")
    for dist in (first, second):
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-9:
            raise DomainError("P0 and P1 must be probability distributions")
    return first, second


def _check_eps(eps: float, closed: bool) -> None:
    if not 0.0 <= eps <= 1.0 or (not closed and eps == 1.0):
        interval = "[0, 1]" if closed else "[0, 1)"
        raise DomainError(f"eps must lie in {interval}, got {eps}")


def beta(p0: Sequence[float], p1: Sequence[float], eps: float) -> BetaResult:
    """Neyman-Pearson optimum beta_{1-eps}(P0, P1)

    Outcomes are accepted in order of decreasing likelihood ratio P0/P1 (outcomes with P1 = 0
    first, ties by index) until the accepted P0 mass reaches 1 - eps; the last outcome is accepted
    with the probability that hits 1 - eps exactly.

    Example:
        ```
        beta([0.9, 0.1], [0.5, 0.5], 0.1).beta  # 0.5
        ```

    Args:
        p0 (Sequence[float]): null hypothesis
        p1 (Sequence[float]): alternative hypothesis on the same outcomes
        eps (float): type I error budget in [0, 1]

    Raises:
        DimensionMismatch: P0 and P1 have different lengths

    Returns:
        BetaResult: beta = sum T P1 with sum T P0 = 1 - eps
    """
    first, second = _pair(p0, p1)
    _check_eps(eps, closed=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(second > 0, first / np.where(second > 0, second, 1.0), np.inf)
    free = second == 0
    order = sorted(range(len(first)), key=lambda r: (not free[r], -ratio[r], r))

    test = np.zeros(len(first))
    needed = 1.0 - eps
    accepted = 0.0
    for outcome in order:
        remaining = needed - accepted
        if remaining <= 0.0:
            break
        mass = first[outcome]
        if mass <= 0.0:
            continue
        if mass <= remaining:
            test[outcome] = 1.0
            accepted += mass
        else:
            test[outcome] = remaining / mass
            accepted = needed
    return BetaResult(beta=float(test @ second), test=BinaryTest(T=test))


def beta_lp(
    p0: Sequence[float],
    p1: Sequence[float],
    eps: float,
    mode: str = "float",
    options: SolverOptions | None = None,
) -> BetaResult:
    """beta_{1-eps}(P0, P1) as the program min sum T P1 s.t. sum T P0 >= 1 - eps, 0 <= T <= 1"""
    first, second = _pair(p0, p1)
    _check_eps(eps, closed=True)
    builder = ProgramBuilder("min", exact=mode == "exact")
    cols = builder.add_variables("T", len(first), objective=second, upper=1)
    builder.add_row("type_one", cols, first, ">=", 1.0 - eps)
    solution = solve_lp(builder.build(), mode, options)
    if not solution.optimal:
        raise SolverFailure(f"beta program finished with status {solution.status}")
    return BetaResult(
        beta=float(solution.objective),
        test=BinaryTest(T=np.asarray(solution.variables("T"), dtype=np.float64)),
    )


def meta_converse(
    channel: Channel, p: Sequence[float], q: Sequence[float], eps: float
) -> float:
    """1 / beta_{1-eps}(P_XY, P_X x Q_Y) for one input distribution p and one output distribution q

    Every choice of q gives an upper bound on the size of a code whose codewords are drawn from p.

    Raises:
        DimensionMismatch: p or q sized wrongly for the channel
    """
    inputs = np.asarray(p, dtype=np.float64)
    outputs = np.asarray(q, dtype=np.float64)
    if inputs.shape != (channel.input_size,) or outputs.shape != (channel.output_size,):
        raise DimensionMismatch(f"p, q of shapes {inputs.shape}, {outputs.shape}")
    joint = (inputs[:, np.newaxis] * channel.matrix).reshape(-1)
    product = np.outer(inputs, outputs).reshape(-1)
    result = beta(joint, product, eps)
    return float("inf") if result.beta <= 0 else 1.0 / result.beta


def ppv_inner(
    channel: Channel,
    p: Sequence[float],
    eps: float,
    mode: str = "float",
    options: SolverOptions | None = None,
) -> float:
    """min over tests T of max_y sum_x T_xy p(x) subject to sum_xy E(y|x) p(x) T_xy >= 1 - eps

    This is the worst output distribution value max_Q beta_{1-eps}(P_XY, P_X x Q_Y) for input p.

    Raises:
        DimensionMismatch: p sized wrongly for the channel
        SolverFailure: the program is infeasible (impossible for a valid input)
    """
    inputs = np.asarray(p, dtype=np.float64)
    if inputs.shape != (channel.input_size,):
        raise DimensionMismatch(f"p needs {channel.input_size} entries, got {inputs.shape}")
    if np.any(inputs < 0) or abs(inputs.sum() - 1.0) > 1e-9:
        raise DomainError("p must be a probability distribution")
    _check_eps(eps, closed=False)
    a_size, b_size = channel.shape
    builder = ProgramBuilder("min", exact=mode == "exact")
    t_cols = builder.add_variables("T", a_size * b_size, upper=1)
    level = builder.add_variables("level", 1, objective=1)
    grid = t_cols.reshape(a_size, b_size)
    rows = np.concatenate([np.repeat(np.arange(b_size), a_size), np.arange(b_size)])
    cols = np.concatenate([grid.T.reshape(-1), np.repeat(level, b_size)])
    values = list(np.tile(inputs, b_size)) + [-1.0] * b_size
    builder.add_rows("output", b_size, rows, cols, values, "<=", 0)
    builder.add_row(
        "detection", t_cols, (inputs[:, np.newaxis] * channel.matrix).reshape(-1), ">=", 1.0 - eps
    )
    solution = solve_lp(builder.build(), mode, options)
    if not solution.optimal:
        raise SolverFailure(f"inner hypothesis testing program is {solution.status}")
    return float(solution.objective)


def ppv_bound(
    channel: Channel, eps: float, mode: str = "float", options: SolverOptions | None = None
) -> PpvResult:
    """Hypothesis testing converse M_ppv(eps) = 1 / min_p min_T max_y sum_x p(x) T_xy

    With R_xy = p(x) T_xy the problem becomes the program
        min mu s.t. sum_x R_xy <= mu for every y, sum_xy E(y|x) R_xy >= 1 - eps,
        sum_x p(x) = 1, 0 <= R_xy <= p(x)
    whose value equals M_beta(eps).

    Args:
        channel (Channel): channel
        eps (float): allowed error in [0, 1)
        mode (str, optional): "float" or "exact". Defaults to "float".
        options (SolverOptions, optional): solver settings

    Raises:
        SolverFailure: the program did not solve to optimality

    Returns:
        PpvResult: M_ppv with the optimal input and weighted test
    """
    _check_eps(eps, closed=False)
    a_size, b_size = channel.shape
    exact = mode == "exact"
    matrix = channel.rational_matrix() if exact else channel.matrix
    builder = ProgramBuilder("min", exact=exact)
    r_cols = builder.add_variables("R", a_size * b_size)
    p_cols = builder.add_variables("p", a_size)
    level = builder.add_variables("mu", 1, objective=1)

    grid = r_cols.reshape(a_size, b_size)
    builder.add_rows(
        "output",
        b_size,
        np.concatenate([np.repeat(np.arange(b_size), a_size), np.arange(b_size)]),
        np.concatenate([grid.T.reshape(-1), np.repeat(level, b_size)]),
        [1] * (a_size * b_size) + [-1] * b_size,
        "<=",
        0,
    )
    builder.add_row("detection", r_cols, list(matrix.reshape(-1)), ">=", 1 - eps)
    builder.add_row("input", p_cols, 1, "=", 1)
    for x in range(a_size):
        builder.add_rows(
            f"test_{x}",
            b_size,
            np.concatenate([np.arange(b_size), np.arange(b_size)]),
            np.concatenate([grid[x], np.repeat(p_cols[x], b_size)]),
            [1] * b_size + [-1] * b_size,
            "<=",
            0,
        )
    solution = solve_lp(builder.build(), mode, options)
    if not solution.optimal:
        raise SolverFailure(f"hypothesis testing converse program is {solution.status}")
    mu = solution.objective
    logger.debug("ppv_bound eps=%s: mu=%s", eps, mu)
    return PpvResult(
        M_ppv=1 / mu,
        mu=mu,
        p=solution.variables("p"),
        R=solution.variables("R").reshape(a_size, b_size),
    )
