"""Converse programs for n uses of a memoryless channel, reduced to one variable per joint type

Restricting to permutation symmetric codes, R only depends on the joint type tau of (x, y) and p on
the type sigma of x. The programs are written in the scaled variables

    U(tau) = |T_sigma| R(tau) with sigma = tau_A      P(sigma) = |T_sigma| p(sigma)

so that sum_sigma P(sigma) = 1 and U(tau) <= P(tau_A). The objective weight of U(tau) is
pi(tau) = |T_tau| E^n(tau) / |T_tau_A|, which sums to one over the joint types of every input type,
and the message constraint of output type sigma_B reads sum_{tau_B = sigma_B} r(tau) U(tau) <= 1/M
with r(tau) = m(tau; tau_B) / |T_tau_A| <= 1. Every coefficient is formed in log space.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
from numpy.typing import NDArray

from channel_models.channel import Channel
from channel_models.errors import DomainError, SolverFailure
from channel_models.joint_types import (
    DEFAULT_TYPE_LIMIT,
    TypeTable,
    enumerate_joint_types,
    exact_multiplicities,
)
from linear_programs.asymptotics import q_inv
from linear_programs.lp_core import LpSolution, ProgramBuilder, SolverOptions, solve_lp

logger = logging.getLogger(__name__)

UNDERFLOW = 1e-300
PRUNE_ABOVE = 1e14
SCALE_WINDOW = (1e-4, 1e4)
FLOOR_SAFEGUARD = 1e-6


def per_string_witness(
    table: TypeTable, U: NDArray[Any], P: NDArray[Any]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Undo the class size scaling of a reduced witness

    The programs solve for U(tau) = |T_tau_A| R(tau) and P(sigma) = |T_sigma| p(sigma). Returns
    R(tau), the value of every pair (x, y) of joint type tau, and p(sigma), the probability of
    every input string of type sigma, as floats.
    """
    log_class = table.log_input_class
    with np.errstate(under="ignore"):
        R = np.asarray(U, dtype=np.float64) * np.exp(-log_class[table.input_index])
        p = np.asarray(P, dtype=np.float64) * np.exp(-log_class)
    return R, p


@dataclass(frozen=True)
class ReducedErrorResult:
    """Minimum NS error for M messages over n channel uses

    U and P are the scaled per-type witnesses, R(tau) = U(tau) / |T_tau_A| is the value of every
    pair (x, y) of type tau and p(sigma) = P(sigma) / |T_sigma| the probability of every x of type
    sigma. `per_string` returns R and p.
    """

    n: int
    M: int
    p_err: Any
    U: NDArray[Any]
    P: NDArray[Any]
    table: TypeTable
    mode: str
    iterations: int
    dropped: int = 0

    def per_string(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """R(tau) and p(sigma) of the witness, see `per_string_witness`"""
        return per_string_witness(self.table, self.U, self.P)

    def witness_json(self) -> dict[str, Any]:
        """Per-type witness keyed by count matrices, scaled (U, P) and per string (R, p)"""
        R, p = self.per_string()
        input_keys = [",".join(str(c) for c in sigma) for sigma in self.table.input_types]
        joint_keys = [self.table.joint_type(i).key() for i in range(len(self.table))]
        return {
            "U": {key: float(u) for key, u in zip(joint_keys, self.U)},
            "P": {key: float(value) for key, value in zip(input_keys, self.P)},
            "R": {key: float(value) for key, value in zip(joint_keys, R)},
            "p": {key: float(value) for key, value in zip(input_keys, p)},
        }


@dataclass(frozen=True)
class ReducedSizeResult:
    """M_beta(eps) over n channel uses with M_NS = floor(M_beta)

    mu_scale is the fixed factor the message constraint was divided by; the program returns
    mu' and M_beta = 1 / (mu_scale mu').
    U and P are scaled like those of ReducedErrorResult, `per_string` returns R and p.
    """

    n: int
    eps: float
    M_beta: Any
    M_NS: int
    U: NDArray[Any]
    P: NDArray[Any]
    table: TypeTable
    mode: str
    iterations: int
    mu_scale: float
    dropped: int = 0
    pruned: int = 0
    warnings: list[str] = field(default_factory=list)

    def per_string(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """R(tau) and p(sigma) of the witness, see `per_string_witness`"""
        return per_string_witness(self.table, self.U, self.P)


@dataclass(frozen=True)
class _Coefficients:
    pi: NDArray[Any]
    r: NDArray[Any]
    log_r: NDArray[np.float64]


def _float_coefficients(table: TypeTable, channel: Channel) -> _Coefficients:
    log_class = table.log_input_class[table.input_index]
    log_pi = table.log_T - log_class + table.log_channel_weights(channel)
    log_r = table.log_m - log_class
    with np.errstate(under="ignore"):
        pi = np.exp(log_pi)
        r = np.exp(log_r)
    return _Coefficients(pi=pi, r=r, log_r=log_r)


def _exact_coefficients(table: TypeTable, channel: Channel) -> _Coefficients:
    matrix = channel.rational_matrix()
    pi = np.empty(len(table), dtype=object)
    r = np.empty(len(table), dtype=object)
    for index in range(len(table)):
        jt = table.joint_type(index)
        size, section = exact_multiplicities(jt)
        input_class = math.factorial(table.n) // math.prod(
            math.factorial(count) for count in jt.marginal_a
        )
        weight = Fraction(1)
        for a, row in enumerate(jt.counts):
            for b, count in enumerate(row):
                if count:
                    weight *= matrix[a, b] ** count
        pi[index] = Fraction(size, input_class) * weight
        r[index] = Fraction(section, input_class)
    log_r = table.log_m - table.log_input_class[table.input_index]
    return _Coefficients(pi=pi, r=r, log_r=log_r)


def _prepare(
    channel: Channel, n: int, mode: str, limit: int
) -> tuple[TypeTable, _Coefficients, int]:
    if n < 1:
        raise DomainError(f"blocklength must be positive, got {n}")
    table = enumerate_joint_types(channel.input_size, channel.output_size, n, limit)
    if mode == "exact":
        return table, _exact_coefficients(table, channel), 0
    coefficients = _float_coefficients(table, channel)
    dropped = int(np.count_nonzero(coefficients.r < UNDERFLOW))
    if dropped:
        logger.warning("%d message constraint coefficients underflow and are dropped", dropped)
    return table, coefficients, dropped


def _require_optimal(solution: LpSolution, what: str) -> LpSolution:
    if not solution.optimal:
        raise SolverFailure(f"reduced {what} program finished with status {solution.status}")
    return solution


def _type_rows(
    table: TypeTable, u_cols: NDArray[np.int64], p_cols: NDArray[np.int64]
) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
    """Triplets of U(tau) - P(tau_A) <= 0, one row per joint type"""
    count = len(table)
    rows = np.concatenate([np.arange(count), np.arange(count)])
    cols = np.concatenate([u_cols, p_cols[table.input_index]])
    values = np.concatenate([np.ones(count), -np.ones(count)])
    return rows, cols, values


def reduced_min_error(
    base: Channel,
    n: int,
    M: int,
    mode: str = "auto",
    options: SolverOptions | None = None,
    type_limit: int = DEFAULT_TYPE_LIMIT,
) -> ReducedErrorResult:
    """Minimum NS error of M messages over n uses of `base`, from the joint type program

    Args:
        base (Channel): single channel use
        n (int): blocklength
        M (int): number of messages
        mode (str, optional): solver mode, "auto" picks HiGHS for large programs.
        Defaults to "auto".
        options (SolverOptions, optional): solver settings
        type_limit (int, optional): largest accepted number of joint types. Defaults to 2e6.

    Raises:
        LimitExceeded: too many joint types
        SolverFailure: the program did not solve to optimality

    Returns:
        ReducedErrorResult: p_err with the per-type witness
    """
    if M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")
    exact = mode == "exact"
    table, coefficients, dropped = _prepare(base, n, mode, type_limit)
    builder = ProgramBuilder("max", exact=exact)
    u_cols = builder.add_variables("U", len(table), objective=coefficients.pi)
    p_cols = builder.add_variables("P", len(table.input_types))

    keep = np.arange(len(table)) if exact else np.flatnonzero(coefficients.r >= UNDERFLOW)
    mu: Any = Fraction(1, M) if exact else 1.0 / M
    builder.add_rows(
        "RM",
        len(table.output_types),
        table.output_index[keep],
        u_cols[keep],
        coefficients.r[keep],
        "<=",
        mu,
    )
    builder.add_rows("Ru", len(table), *_type_rows(table, u_cols, p_cols), "<=", 0)
    builder.add_row("norm", p_cols, 1, "=", 1)
    program = builder.build()
    logger.debug("reduced error program n=%d: %d variables", n, program.num_variables)

    solution = _require_optimal(solve_lp(program, mode, options), "error")
    p_err = 1 - solution.objective
    if not exact:
        p_err = min(max(float(p_err), 0.0), 1.0 - 1.0 / M)
    return ReducedErrorResult(
        n=n,
        M=M,
        p_err=p_err,
        U=solution.variables("U"),
        P=solution.variables("P"),
        table=table,
        mode=solution.mode,
        iterations=solution.iterations,
        dropped=dropped,
    )


def estimate_log_size(channel: Channel, n: int, eps: float) -> float:
    """Rough natural log of M_beta(eps) over n uses, used to scale the size program

    Uses the information density moments of the uniform input in a normal approximation.
    """
    matrix = channel.matrix
    q = matrix.mean(axis=0)
    positive = matrix > 0
    with np.errstate(divide="ignore"):
        density = np.where(positive, np.log(np.where(positive, matrix, 1.0) / q), 0.0)
    mean = float((matrix * density).sum(axis=1).mean())
    variance = float((matrix * (density - mean) ** 2).sum(axis=1).mean())
    level = min(max(eps, 1e-9), 1 - 1e-9)
    return max(n * mean - math.sqrt(n * variance) * q_inv(level), 0.0)


def _size_program_solution(
    table: TypeTable,
    coefficients: _Coefficients,
    eps: Any,
    mu_scale: float,
    mode: str,
    options: SolverOptions | None,
) -> tuple[LpSolution, int]:
    exact = mode == "exact"
    builder = ProgramBuilder("min", exact=exact)
    if exact:
        scaled = coefficients.r
        pruned_mask = np.zeros(len(table), dtype=bool)
        keep = np.arange(len(table))
    else:
        log_scaled = coefficients.log_r - math.log(mu_scale)
        pruned_mask = log_scaled > math.log(PRUNE_ABOVE)
        with np.errstate(under="ignore", over="ignore"):
            scaled = np.exp(np.minimum(log_scaled, math.log(PRUNE_ABOVE)))
        keep = np.flatnonzero(~pruned_mask & (scaled >= UNDERFLOW))

    if pruned_mask.any():
        u_cols = builder.add_variables("U", len(table), upper=np.where(pruned_mask, 0.0, 1.0))
    else:
        u_cols = builder.add_variables("U", len(table))
    p_cols = builder.add_variables("P", len(table.input_types))
    mu_col = builder.add_variables("mu", 1, objective=1)

    outputs = len(table.output_types)
    builder.add_rows(
        "RM",
        outputs,
        np.concatenate([table.output_index[keep], np.arange(outputs)]),
        np.concatenate([u_cols[keep], np.repeat(mu_col, outputs)]),
        list(scaled[keep]) + [-1] * outputs,
        "<=",
        0,
    )
    builder.add_rows("Ru", len(table), *_type_rows(table, u_cols, p_cols), "<=", 0)
    builder.add_row("success", u_cols, coefficients.pi, ">=", 1 - eps)
    builder.add_row("norm", p_cols, 1, "=", 1)
    solution = _require_optimal(solve_lp(builder.build(), mode, options), "size")
    return solution, int(pruned_mask.sum())


def reduced_max_size(
    base: Channel,
    n: int,
    eps: float,
    mode: str = "auto",
    options: SolverOptions | None = None,
    type_limit: int = DEFAULT_TYPE_LIMIT,
) -> ReducedSizeResult:
    """M_beta(eps) over n uses of `base`, from the joint type program

    Solves min mu subject to sum_{tau_B = sigma_B} r(tau) U(tau) <= mu for every output type,
    U(tau) <= P(tau_A), sum pi U >= 1 - eps, sum P = 1, and returns M_beta = 1/mu. The message
    constraint is divided by an estimate of mu so the optimum is of order one; a second solve with
    a corrected scale runs when the first optimum lands far from one. Variables whose scaled
    coefficient exceeds 1e14 are fixed at zero and counted.

    Args:
        base (Channel): single channel use
        n (int): blocklength
        eps (float): allowed error in [0, 1)
        mode (str, optional): solver mode, "auto" picks HiGHS for large programs.
        Defaults to "auto".
        options (SolverOptions, optional): solver settings
        type_limit (int, optional): largest accepted number of joint types. Defaults to 2e6.

    Raises:
        DomainError: eps outside [0, 1)
        LimitExceeded: too many joint types
        SolverFailure: the program did not solve to optimality

    Returns:
        ReducedSizeResult: M_beta and M_NS with the per-type witness
    """
    if not 0 <= eps < 1:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    exact = mode == "exact"
    table, coefficients, dropped = _prepare(base, n, mode, type_limit)
    warnings = []
    if dropped:
        warnings.append(f"{dropped} underflowed message coefficients dropped")

    if exact:
        level: Any = eps if isinstance(eps, Fraction) else Fraction(repr(float(eps)))
        solution, pruned = _size_program_solution(table, coefficients, level, 1.0, mode, options)
        mu_scale = 1.0
        m_beta: Any = 1 / solution.objective
        largest = int(math.floor(m_beta))
    else:
        mu_scale = math.exp(-estimate_log_size(base, n, eps))
        solution, pruned = _size_program_solution(
            table, coefficients, eps, mu_scale, mode, options
        )
        scaled_mu = float(solution.objective)
        if not SCALE_WINDOW[0] <= scaled_mu <= SCALE_WINDOW[1]:
            logger.debug("rescaling the size program by %.3e and solving again", scaled_mu)
            mu_scale *= scaled_mu
            solution, pruned = _size_program_solution(
                table, coefficients, eps, mu_scale, mode, options
            )
        m_beta = 1.0 / (mu_scale * float(solution.objective))
        largest = int(math.floor(m_beta + FLOOR_SAFEGUARD))
    if pruned:
        logger.warning("%d joint type variables pruned from the size program", pruned)
        warnings.append(f"{pruned} joint type variables fixed at zero")
    return ReducedSizeResult(
        n=n,
        eps=eps,
        M_beta=m_beta,
        M_NS=largest,
        U=solution.variables("U"),
        P=solution.variables("P"),
        table=table,
        mode=solution.mode,
        iterations=solution.iterations,
        mu_scale=mu_scale,
        dropped=dropped,
        pruned=pruned,
        warnings=warnings,
    )
