"""The NS converse programs for one channel use (or an explicit tensor power)

min_error: largest success probability of an M message NS code
    max sum_xy E(y|x) R_xy
    s.t. sum_x R_xy <= 1/M (RM), R_xy <= p(x) (Ru), sum_x p(x) = 1 (norm), R, p >= 0
max_size: M_beta(eps), whose floor is the largest NS code with error at most eps
    max sum_x v_x
    s.t. F_xy <= v_x (MpXY), sum_x F_xy <= 1 (MpY), sum_xy E(y|x) F_xy >= (1 - eps) sum_x v_x (MpP)

Dual certificates are read off the row duals of the solved programs.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from channel_models.channel import Channel
from channel_models.errors import DimensionMismatch, DomainError, ParseError, SolverFailure
from linear_programs.lp_core import (
    LinearProgram,
    LpSolution,
    ProgramBuilder,
    SolverOptions,
    solve_lp,
)

logger = logging.getLogger(__name__)

FLOOR_SAFEGUARD = 1e-6
CERTIFICATE_TOL = 1e-9


def to_json_number(value: Any) -> Any:
    """Floats stay numbers, Fractions become "num/den" strings"""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return float(value)


def from_json_number(value: Any) -> Any:
    """Inverse of `to_json_number`

    Raises:
        ParseError: neither a number nor a rational string
    """
    if isinstance(value, bool):
        raise ParseError(f"{value!r} is not a number")
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError as err:
            raise ParseError(f"{value!r} is not a rational number") from err
    if isinstance(value, (int, float)):
        if not math.isfinite(value):
            raise ParseError(f"{value!r} is not finite")
        return value
    raise ParseError(f"{value!r} is not a number")


def _json_array(values: NDArray[Any]) -> list[Any]:
    array = np.asarray(values, dtype=object)
    if array.ndim == 1:
        return [to_json_number(value) for value in array]
    return [_json_array(row) for row in array]


def _load_array(values: Any, name: str) -> NDArray[Any]:
    if not isinstance(values, list):
        raise ParseError(f'"{name}" must be a list')
    parsed = [
        _load_array(value, name) if isinstance(value, list) else from_json_number(value)
        for value in values
    ]
    exact = any(isinstance(value, Fraction) for value in np.asarray(parsed, dtype=object).flat)
    return np.asarray(parsed, dtype=object if exact else np.float64)


@dataclass(frozen=True)
class QuerySpec:
    """One converse query: a message count for the error program or an error for the size program"""

    M: int | None = None
    eps: float | None = None

    def __post_init__(self) -> None:
        if (self.M is None) == (self.eps is None):
            raise DomainError("a query needs exactly one of M and eps")
        if self.M is not None and self.M < 1:
            raise DomainError(f"M must be a positive integer, got {self.M}")
        if self.eps is not None and not 0.0 <= self.eps < 1.0:
            raise DomainError(f"eps must lie in [0, 1), got {self.eps}")

    @property
    def mu(self) -> Fraction | None:
        """mu = 1/M for error queries"""
        return None if self.M is None else Fraction(1, self.M)


@dataclass(frozen=True)
class ErrorPrimalSolution:
    """Optimal (R, p) of the error program"""

    R: NDArray[Any]
    p: NDArray[Any]
    success: Any

    @property
    def p_err(self) -> Any:
        """1 - success"""
        return 1 - self.success


@dataclass(frozen=True)
class ErrorDualCertificate:
    """Dual point (z, D, alpha) of the error program"""

    z: NDArray[Any]
    D: NDArray[Any]
    alpha: Any

    def certified_error(self, M: int) -> Any:
        """1 - alpha - sum_y z_y / M, a lower bound on the NS error when the certificate is valid"""
        return 1 - self.alpha - self.z.sum() / M


@dataclass(frozen=True)
class ErrorBoundResult:
    """Minimum NS error for M messages with the primal witness and the dual certificate"""

    M: int
    p_err: Any
    primal: ErrorPrimalSolution
    dual: ErrorDualCertificate
    mode: str
    iterations: int
    gap: float


@dataclass(frozen=True)
class SizePrimalSolution:
    """Optimal (F, v) of the size program, value = t = sum_x v_x"""

    F: NDArray[Any]
    v: NDArray[Any]
    value: Any

    @property
    def t(self) -> Any:
        """Charnes-Cooper scale"""
        return self.value


@dataclass(frozen=True)
class SizeDualCertificate:
    """Dual point (V, c, zeta) of the size program"""

    V: NDArray[Any]
    c: NDArray[Any]
    zeta: Any

    @property
    def certified_bound(self) -> Any:
        """sum_y c_y, an upper bound on M_beta when the certificate is valid"""
        exact = any(isinstance(value, Fraction) for value in self.c)
        return sum(self.c, Fraction(0) if exact else 0.0)

    def to_json_dict(self) -> dict[str, Any]:
        """{"zeta": ..., "c": [...], "V": [[...]]}, Fractions as "num/den" strings"""
        return {
            "zeta": to_json_number(self.zeta),
            "c": _json_array(self.c),
            "V": _json_array(self.V),
        }


@dataclass(frozen=True)
class SizeBoundResult:
    """M_beta(eps) with M_NS = floor(M_beta), the primal witness and the dual certificate"""

    eps: float
    M_beta: Any
    M_NS: int
    primal: SizePrimalSolution
    dual: SizeDualCertificate
    mode: str
    iterations: int
    gap: float


@dataclass(frozen=True)
class CertifiedBound:
    """Outcome of a certificate check"""

    valid: bool
    bound: Any
    violations: list[str] = field(default_factory=list)


def _matrix(channel: Channel, exact: bool) -> NDArray[Any]:
    return channel.rational_matrix() if exact else channel.matrix


def _require_optimal(solution: LpSolution, what: str) -> LpSolution:
    if not solution.optimal:
        raise SolverFailure(f"{what} program finished with status {solution.status}")
    return solution


def error_program(channel: Channel, mu: Any, exact: bool = False) -> LinearProgram:
    """Error program with the message constraint sum_x R_xy <= mu

    Args:
        channel (Channel): channel
        mu (Any): 1/M, any value in (0, 1]
        exact (bool, optional): build with Fractions. Defaults to False.

    Returns:
        LinearProgram: variables R (row major x, y) and p, rows RM, Ru, norm
    """
    a_size, b_size = channel.shape
    matrix = _matrix(channel, exact)
    builder = ProgramBuilder("max", exact=exact)
    r_cols = builder.add_variables("R", a_size * b_size, objective=matrix.reshape(-1))
    p_cols = builder.add_variables("p", a_size)
    r_grid = r_cols.reshape(a_size, b_size)

    builder.add_rows("RM", b_size, np.tile(np.arange(b_size), a_size), r_cols, 1, "<=", mu)
    cells = np.arange(a_size * b_size)
    builder.add_rows(
        "Ru",
        a_size * b_size,
        np.concatenate([cells, cells]),
        np.concatenate([r_grid.reshape(-1), np.repeat(p_cols, b_size)]),
        np.concatenate([np.ones(a_size * b_size), -np.ones(a_size * b_size)]),
        "<=",
        0,
    )
    builder.add_row("norm", p_cols, 1, "=", 1)
    return builder.build()


def min_error(
    channel: Channel, M: int, mode: str = "float", options: SolverOptions | None = None
) -> ErrorBoundResult:
    """Smallest average error of an NS code with M messages

    Example:
        ```
        min_error(make_standard("bsc", 0.1), 2).p_err  # 0.1
        ```

    Args:
        channel (Channel): channel
        M (int): number of messages
        mode (str, optional): "float", "exact", "highs" or "auto". Defaults to "float".
        options (SolverOptions, optional): solver settings

    Raises:
        DomainError: M < 1
        SolverFailure: the program did not solve to optimality

    Returns:
        ErrorBoundResult: p_err with (R, p) and the certificate (z, D, alpha)
    """
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M!r}")
    exact = mode == "exact"
    mu: Any = Fraction(1, int(M)) if exact else 1.0 / M
    program = error_program(channel, mu, exact)
    solution = _require_optimal(solve_lp(program, mode, options), "error")
    a_size, b_size = channel.shape
    success = solution.objective
    p_err = 1 - success
    if not exact:
        p_err = min(max(float(p_err), 0.0), 1.0 - 1.0 / M)
    logger.debug("min_error M=%d: p_err=%s after %d pivots", M, p_err, solution.iterations)
    return ErrorBoundResult(
        M=int(M),
        p_err=p_err,
        primal=ErrorPrimalSolution(
            R=solution.variables("R").reshape(a_size, b_size),
            p=solution.variables("p"),
            success=success,
        ),
        dual=ErrorDualCertificate(
            z=solution.row_duals("RM"),
            D=solution.row_duals("Ru").reshape(a_size, b_size),
            alpha=solution.row_duals("norm")[0],
        ),
        mode=solution.mode,
        iterations=solution.iterations,
        gap=solution.gap,
    )


def error_curve(
    channel: Channel, mus: Sequence[float], options: SolverOptions | None = None
) -> list[tuple[float, float]]:
    """Largest NS success probability as a function of mu = 1/M

    The curve is piecewise linear, non-increasing in M and concave in mu.

    Returns:
        list[tuple[float, float]]: (mu, success) in the order of `mus`
    """
    curve = []
    for mu in mus:
        if not 0.0 < mu <= 1.0:
            raise DomainError(f"mu must lie in (0, 1], got {mu}")
        solution = _require_optimal(solve_lp(error_program(channel, mu), "float", options), "error")
        curve.append((float(mu), float(solution.objective)))
    return curve


def error_dual_value(channel: Channel, M: int, z: Sequence[float]) -> float:
    """min_x sum_y (min(z_y, E(y|x)) - z_y / M), a lower bound on the NS error for any z >= 0

    Raises:
        DimensionMismatch: z does not have one entry per output
        DomainError: negative entries in z
    """
    weights = np.asarray(z, dtype=np.float64)
    if weights.shape != (channel.output_size,):
        raise DimensionMismatch(f"z needs {channel.output_size} entries, got {weights.shape}")
    if np.any(weights < 0):
        raise DomainError("z must be nonnegative")
    per_input = np.minimum(weights[np.newaxis, :], channel.matrix).sum(axis=1) - weights.sum() / M
    return float(per_input.min())


def _rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(repr(float(value)))


def _as_scalar(value: Any, exact: bool) -> Any:
    return _rational(value) if exact else float(value)


def _as_array(values: Sequence[Any] | NDArray[Any], exact: bool) -> NDArray[Any]:
    if not exact:
        return np.asarray(values, dtype=np.float64)
    array = np.array(values, dtype=object)
    for index, value in np.ndenumerate(array):
        array[index] = _rational(value)
    return array


def certify_error(
    channel: Channel,
    M: int,
    cert: ErrorDualCertificate,
    tol: float = CERTIFICATE_TOL,
    exact: bool = False,
) -> CertifiedBound:
    """Check an error certificate: E <= D + z, sum_y D_xy <= alpha, D, z >= 0

    Args:
        channel (Channel): channel
        M (int): number of messages
        cert (ErrorDualCertificate): certificate to check
        tol (float, optional): accepted violation, ignored in exact mode. Defaults to 1e-9.
        exact (bool, optional): check with Fractions. Defaults to False.

    Raises:
        DimensionMismatch: certificate shape differs from the channel

    Returns:
        CertifiedBound: when valid, bound = 1 - alpha - sum z / M is a lower bound on the NS error
    """
    z, dual = _as_array(cert.z, exact), _as_array(cert.D, exact)
    if z.shape != (channel.output_size,) or dual.shape != channel.shape:
        raise DimensionMismatch(f"certificate shapes {z.shape}, {dual.shape} for {channel.shape}")
    alpha = _as_scalar(cert.alpha, exact)
    matrix = _matrix(channel, exact)
    limit: Any = 0 if exact else tol
    violations = []
    for y in np.flatnonzero(z < -limit):
        violations.append(f"z[{y}] = {z[y]} < 0")
    for x, y in np.argwhere(dual < -limit):
        violations.append(f"D[{x},{y}] = {dual[x, y]} < 0")
    slack = dual + z[np.newaxis, :] - matrix
    for x, y in np.argwhere(slack < -limit):
        violations.append(f"D[{x},{y}] + z[{y}] >= E({y}|{x}) fails by {-slack[x, y]}")
    for x, total in enumerate(dual.sum(axis=1)):
        if total - alpha > limit:
            violations.append(f"sum_y D[{x},y] <= alpha fails by {total - alpha}")
    bound = 1 - alpha - z.sum() / M
    return CertifiedBound(valid=not violations, bound=bound, violations=violations)


def size_program(channel: Channel, eps: Any, exact: bool = False) -> LinearProgram:
    """Charnes-Cooper size program, variables F (row major) and v, rows MpXY, MpY, MpP"""
    a_size, b_size = channel.shape
    matrix = _matrix(channel, exact)
    builder = ProgramBuilder("max", exact=exact)
    f_cols = builder.add_variables("F", a_size * b_size)
    v_cols = builder.add_variables("v", a_size, objective=1)
    cells = np.arange(a_size * b_size)
    builder.add_rows(
        "MpXY",
        a_size * b_size,
        np.concatenate([cells, cells]),
        np.concatenate([f_cols, np.repeat(v_cols, b_size)]),
        np.concatenate([np.ones(a_size * b_size), -np.ones(a_size * b_size)]),
        "<=",
        0,
    )
    builder.add_rows("MpY", b_size, np.tile(np.arange(b_size), a_size), f_cols, 1, "<=", 1)
    keep = 1 - eps
    builder.add_row(
        "MpP",
        np.concatenate([f_cols, v_cols]),
        list(matrix.reshape(-1)) + [-keep] * a_size,
        ">=",
        0,
    )
    return builder.build()


def _floor_size(value: Any) -> int:
    if isinstance(value, Fraction):
        return int(math.floor(value))
    return int(math.floor(float(value) + FLOOR_SAFEGUARD))


def max_size(
    channel: Channel, eps: float, mode: str = "float", options: SolverOptions | None = None
) -> SizeBoundResult:
    """M_beta(eps, E) and the largest NS code size M_NS = floor(M_beta) with error at most eps

    Example:
        ```
        max_size(make_standard("useless", [0.5, 0.5]), 0.75).M_beta  # 4
        ```

    Args:
        channel (Channel): channel
        eps (float): allowed average error in [0, 1)
        mode (str, optional): "float", "exact", "highs" or "auto". Defaults to "float".
        options (SolverOptions, optional): solver settings

    Raises:
        DomainError: eps outside [0, 1)
        SolverFailure: the program did not solve to optimality

    Returns:
        SizeBoundResult: M_beta, M_NS, the primal point and the certificate (V, c, zeta)
    """
    if not 0 <= eps < 1:
        raise DomainError(f"eps must lie in [0, 1), got {eps}")
    exact = mode == "exact"
    program = size_program(channel, _rational(eps) if exact else float(eps), exact)
    solution = _require_optimal(solve_lp(program, mode, options), "size")
    a_size, b_size = channel.shape
    value = solution.objective
    largest = _floor_size(value)
    logger.debug("max_size eps=%s: M_beta=%s after %d pivots", eps, value, solution.iterations)
    return SizeBoundResult(
        eps=eps,
        M_beta=value,
        M_NS=largest,
        primal=SizePrimalSolution(
            F=solution.variables("F").reshape(a_size, b_size),
            v=solution.variables("v"),
            value=value,
        ),
        dual=SizeDualCertificate(
            V=solution.row_duals("MpXY").reshape(a_size, b_size),
            c=solution.row_duals("MpY"),
            zeta=-solution.row_duals("MpP")[0],
        ),
        mode=solution.mode,
        iterations=solution.iterations,
        gap=solution.gap,
    )


def certify_size(
    channel: Channel,
    eps: Any,
    cert: SizeDualCertificate,
    tol: float = CERTIFICATE_TOL,
    exact: bool = False,
) -> CertifiedBound:
    """Check a size certificate: V + c >= zeta E, sum_y V_xy <= (1 - eps) zeta - 1, V, c, zeta >= 0

    Args:
        channel (Channel): channel
        eps (Any): error level the certificate is for
        cert (SizeDualCertificate): certificate to check
        tol (float, optional): accepted violation, ignored in exact mode. Defaults to 1e-9.
        exact (bool, optional): check with Fractions (floats taken at their decimal text).
        Defaults to False.

    Raises:
        DimensionMismatch: certificate shape differs from the channel

    Returns:
        CertifiedBound: when valid, bound = sum_y c_y is an upper bound on M_beta and so on M_NS
    """
    dual, c = _as_array(cert.V, exact), _as_array(cert.c, exact)
    if c.shape != (channel.output_size,) or dual.shape != channel.shape:
        raise DimensionMismatch(f"certificate shapes {dual.shape}, {c.shape} for {channel.shape}")
    zeta = _as_scalar(cert.zeta, exact)
    level = _as_scalar(eps, exact)
    matrix = _matrix(channel, exact)
    limit: Any = 0 if exact else tol
    violations = []
    if zeta < -limit:
        violations.append(f"zeta = {zeta} < 0")
    for y in np.flatnonzero(c < -limit):
        violations.append(f"c[{y}] = {c[y]} < 0")
    for x, y in np.argwhere(dual < -limit):
        violations.append(f"V[{x},{y}] = {dual[x, y]} < 0")
    slack = dual + c[np.newaxis, :] - zeta * matrix
    for x, y in np.argwhere(slack < -limit):
        violations.append(f"V[{x},{y}] + c[{y}] >= zeta E({y}|{x}) fails by {-slack[x, y]}")
    budget = (1 - level) * zeta - 1
    for x, total in enumerate(dual.sum(axis=1)):
        if total - budget > limit:
            violations.append(f"sum_y V[{x},y] <= (1-eps) zeta - 1 fails by {total - budget}")
    return CertifiedBound(valid=not violations, bound=c.sum(), violations=violations)


def save_certificate(cert: SizeDualCertificate, path: str | Path) -> None:
    """Write a size certificate as JSON"""
    with open(path, "w", encoding="utf-8") as cert_file:
        json.dump(cert.to_json_dict(), cert_file, indent=4)


def parse_certificate(text: str) -> SizeDualCertificate:
    """Read a size certificate from its JSON text

    Raises:
        ParseError: malformed document
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"certificate is not valid JSON: {err}") from err
    if not isinstance(document, dict) or not {"zeta", "c", "V"} <= set(document):
        raise ParseError('certificate must be an object with "zeta", "c" and "V"')
    return SizeDualCertificate(
        V=_load_array(document["V"], "V"),
        c=_load_array(document["c"], "c"),
        zeta=from_json_number(document["zeta"]),
    )


def load_certificate(path: str | Path) -> SizeDualCertificate:
    """Read a size certificate written by `save_certificate`"""
    with open(path, "r", encoding="utf-8") as cert_file:
        return parse_certificate(cert_file.read())
