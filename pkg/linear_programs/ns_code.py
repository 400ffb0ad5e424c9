"""Symmetrized non-signalling codes built from error program witnesses

A code with M messages is the conditional distribution

    Z(x, w_hat | w, y) = R_xy                        if w_hat == w
                         (p(x) - R_xy) / (M - 1)     otherwise

held as a tensor Z[w, y, x, w_hat].
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from channel_models.channel import Channel, validate_channel
from channel_models.errors import DimensionMismatch, DomainError, InfeasibleWitness, ParseError
from linear_programs.converse import ErrorPrimalSolution

logger = logging.getLogger(__name__)

WITNESS_TOL = 1e-8
CLAMP_TOL = 1e-12
TENSOR_LIMIT = 10**7


@dataclass(frozen=True, eq=False)
class NsCode:
    """Symmetrized NS code (M, R, p)"""

    M: int
    R: NDArray[np.float64]
    p: NDArray[np.float64]

    @property
    def shape(self) -> tuple[int, int]:
        """(|A|, |B|) of the channel the code is for"""
        return int(self.R.shape[0]), int(self.R.shape[1])

    def off_diagonal(self) -> NDArray[np.float64]:
        """Z(x, w_hat | w, y) for w_hat != w, as an |A|x|B| array"""
        if self.M == 1:
            return np.zeros_like(self.R)
        return np.asarray((self.p[:, np.newaxis] - self.R) / (self.M - 1), dtype=np.float64)

    def to_json_dict(self) -> dict[str, Any]:
        """{"M": ..., "p": [...], "R": [[...]]}"""
        return {"M": self.M, "p": self.p.tolist(), "R": self.R.tolist()}


@dataclass(frozen=True)
class NsReport:
    """Non-signalling residuals of a code

    nsa_to_b: largest change of P(w_hat | w, y) over w, the decoder output must not depend on the
    encoder input
    nsb_to_a: largest change of P(x | w, y) over y, the encoder output must not depend on the
    decoder input
    normalization: max_w |sum Z E - 1| when a channel is given, otherwise
    max_{w,y} |sum_{x,w_hat} Z - 1|
    """

    nsa_to_b: float
    nsb_to_a: float
    normalization: float
    passed: bool


def _witness_violations(
    M: int, R: NDArray[np.float64], p: NDArray[np.float64], tol: float
) -> list[str]:
    violations = []
    for x, y in np.argwhere(R < -tol):
        violations.append(f"R[{x},{y}] = {R[x, y]:.3e} < 0")
    for x, y in np.argwhere(R - p[:, np.newaxis] > CLAMP_TOL):
        violations.append(f"R[{x},{y}] exceeds p({x}) by {R[x, y] - p[x]:.3e}")
    for x in np.flatnonzero(p < -tol):
        violations.append(f"p({x}) = {p[x]:.3e} < 0")
    columns = R.sum(axis=0)
    for y in np.flatnonzero(columns > 1.0 / M + tol):
        violations.append(f"sum_x R[x,{y}] exceeds 1/M by {columns[y] - 1.0 / M:.3e}")
    if abs(p.sum() - 1.0) > tol:
        violations.append(f"sum_x p(x) = 1{p.sum() - 1.0:+.3e}")
    return violations


def build_code(
    channel: Channel, M: int, witness: ErrorPrimalSolution, tol: float = WITNESS_TOL
) -> NsCode:
    """Turn a feasible error program point into an NS code

    R entries above p(x) by at most 1e-12 are clamped, p is renormalized, columns above 1/M by at
    most `tol` are scaled down to 1/M, and every output y with sum_x R_xy < 1/M is raised to 1/M
    through R' = (1 - lambda) R + lambda p. This keeps R' <= p, never lowers the success
    probability and makes the decoder output independent of the message.
    With M = 1 the code always decodes the single message and uses R_xy = p(x).

    Example:
        ```
        bsc = make_standard("bsc", 0.1)
        code = build_code(bsc, 2, min_error(bsc, 2).primal)
        code_error(code, bsc)  # 0.1
        ```

    Args:
        channel (Channel): channel the witness was computed for
        M (int): number of messages
        witness (ErrorPrimalSolution): (R, p) of the error program
        tol (float, optional): accepted constraint violation. Defaults to 1e-8.

    Raises:
        DimensionMismatch: witness shape differs from the channel
        InfeasibleWitness: the witness violates the error program constraints

    Returns:
        NsCode: symmetrized code
    """
    if M < 1:
        raise DomainError(f"M must be a positive integer, got {M}")
    R = np.asarray(witness.R, dtype=np.float64)
    p = np.asarray(witness.p, dtype=np.float64)
    if R.shape != channel.shape or p.shape != (channel.input_size,):
        raise DimensionMismatch(f"witness shapes {R.shape}, {p.shape} for {channel.shape}")
    violations = _witness_violations(M, R, p, tol)
    if violations:
        raise InfeasibleWitness(violations)

    p = np.maximum(p, 0.0)
    R = np.minimum(np.maximum(R, 0.0), p[:, np.newaxis])
    total = p.sum()
    p, R = p / total, R / total
    if M == 1:
        return NsCode(M=1, R=np.repeat(p[:, np.newaxis], channel.output_size, axis=1), p=p)

    target = 1.0 / M
    columns = R.sum(axis=0)
    full = columns > target
    if full.any():
        R[:, full] *= target / columns[full]
        columns = R.sum(axis=0)
    short = columns < target
    if short.any():
        weight = np.zeros(channel.output_size)
        weight[short] = (target - columns[short]) / (1.0 - columns[short])
        R = (1.0 - weight)[np.newaxis, :] * R + weight[np.newaxis, :] * p[:, np.newaxis]
        logger.debug("raised %d output columns to 1/M", int(short.sum()))
    clamped = np.count_nonzero(R > p[:, np.newaxis])
    if clamped:
        logger.warning("clamped %d entries of R to p(x)", clamped)
        R = np.minimum(R, p[:, np.newaxis])
    return NsCode(M=int(M), R=R, p=p)


def code_tensor(code: NsCode, limit: int = TENSOR_LIMIT) -> NDArray[np.float64]:
    """Full conditional distribution Z[w, y, x, w_hat]

    Raises:
        DomainError: M^2 |A| |B| exceeds `limit`
    """
    a_size, b_size = code.shape
    if code.M * code.M * a_size * b_size > limit:
        raise DomainError(f"code tensor with M={code.M} exceeds {limit} entries")
    off = code.off_diagonal().T
    tensor = np.broadcast_to(off[np.newaxis, :, :, np.newaxis], (code.M, b_size, a_size, code.M))
    tensor = tensor.copy()
    for w in range(code.M):
        tensor[w, :, :, w] = code.R.T
    return tensor


def _as_tensor(code: NsCode | NDArray[np.float64]) -> NDArray[np.float64]:
    if isinstance(code, NsCode):
        return code_tensor(code)
    tensor = np.asarray(code, dtype=np.float64)
    if tensor.ndim != 4 or tensor.shape[0] != tensor.shape[3]:
        raise DimensionMismatch(f"code tensor must be indexed [w, y, x, w_hat], got {tensor.shape}")
    return tensor


def normalization_residual(code: NsCode | NDArray[np.float64], channel: Channel) -> float:
    """max_w |sum_{x, y, w_hat} Z(x, w_hat | w, y) E(y|x) - 1|

    The sum is one for every message exactly when the code is a valid code for every channel.

    Raises:
        DimensionMismatch: code alphabets differ from the channel
    """
    tensor = _as_tensor(code)
    if tensor.shape[1:3] != (channel.output_size, channel.input_size):
        raise DimensionMismatch(f"code tensor {tensor.shape} for channel {channel.shape}")
    totals = np.einsum("wyxv,xy->w", tensor, channel.matrix)
    return float(np.abs(totals - 1.0).max())


def verify_nonsignalling(
    code: NsCode | NDArray[np.float64], tol: float = 1e-10, channel: Channel | None = None
) -> NsReport:
    """Measure both non-signalling conditions on the full tensor

    Args:
        code (NsCode | NDArray): code, or a raw tensor Z[w, y, x, w_hat]
        tol (float, optional): largest residual that passes. Defaults to 1e-10.
        channel (Channel, optional): also report the normalization against this channel

    Returns:
        NsReport: residuals, never raises on violation
    """
    tensor = _as_tensor(code)
    decoder = tensor.sum(axis=2)
    encoder = tensor.sum(axis=3)
    nsa_to_b = float((decoder.max(axis=0) - decoder.min(axis=0)).max())
    nsb_to_a = float((encoder.max(axis=1) - encoder.min(axis=1)).max())
    if channel is None:
        normalization = float(np.abs(tensor.sum(axis=(2, 3)) - 1.0).max())
    else:
        normalization = normalization_residual(tensor, channel)
    return NsReport(
        nsa_to_b=nsa_to_b,
        nsb_to_a=nsb_to_a,
        normalization=normalization,
        passed=nsa_to_b <= tol and nsb_to_a <= tol,
    )


def signalling_channel(
    code: NsCode | NDArray[np.float64], tol: float = 1e-10
) -> tuple[Channel, float] | None:
    """Deterministic channel on which a code that signals from decoder to encoder breaks

    Finds w, x0, y0, y1 with P(x0 | w, y0) > P(x0 | w, y1) and builds E(y0|x0) = 1, E(y1|x) = 1
    for x != x0. Under that channel sum Z E for message w equals
    1 + P(x0 | w, y0) - P(x0 | w, y1) > 1.

    Returns:
        tuple[Channel, float] | None: the channel and the excess of the sum over one, None when the
        code does not signal beyond `tol`
    """
    tensor = _as_tensor(code)
    encoder = tensor.sum(axis=3)
    spread = encoder.max(axis=1) - encoder.min(axis=1)
    w, x0 = np.unravel_index(int(np.argmax(spread)), spread.shape)
    if spread[w, x0] <= tol:
        return None
    y0 = int(np.argmax(encoder[w, :, x0]))
    y1 = int(np.argmin(encoder[w, :, x0]))
    b_size, a_size = tensor.shape[1], tensor.shape[2]
    matrix = np.zeros((a_size, b_size))
    matrix[:, y1] = 1.0
    matrix[x0, y1] = 0.0
    matrix[x0, y0] = 1.0
    channel = validate_channel(matrix)
    totals = np.einsum("wyxv,xy->w", tensor, channel.matrix)
    return channel, float(totals[w] - 1.0)


def evaluate_code(code: NsCode, channel: Channel) -> tuple[float, float]:
    """(error probability, normalization residual) of a code on a channel

    Raises:
        DimensionMismatch: code alphabets differ from the channel
    """
    if code.shape != channel.shape:
        raise DimensionMismatch(f"code for {code.shape} used on a {channel.shape} channel")
    error = 1.0 - float((code.R * channel.matrix).sum())
    a_size, b_size = code.shape
    if code.M * code.M * a_size * b_size <= TENSOR_LIMIT:
        tensor = code_tensor(code)
        correct = sum(
            float((tensor[w, :, :, w] * channel.matrix.T).sum()) for w in range(code.M)
        )
        error = 1.0 - correct / code.M
        residual = normalization_residual(tensor, channel)
    else:
        # every (w, y) slice of a symmetrized code sums to p(x) over w_hat
        residual = abs(float(code.p @ channel.matrix.sum(axis=1)) - 1.0)
    return max(error, 0.0), residual


def code_error(code: NsCode, channel: Channel) -> float:
    """Average error 1 - (1/M) sum_{w,x,y} Z(x, w | w, y) E(y|x) under uniform messages"""
    error, residual = evaluate_code(code, channel)
    logger.debug("code error %.12g, normalization residual %.3e", error, residual)
    return error


def parse_code(text: str) -> NsCode:
    """Read a code from its JSON text {"M": ..., "p": [...], "R": [[...]]}

    Raises:
        ParseError: malformed document
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"code is not valid JSON: {err}") from err
    if not isinstance(document, dict) or not {"M", "p", "R"} <= set(document):
        raise ParseError('code must be an object with "M", "p" and "R"')
    M = document["M"]
    if isinstance(M, bool) or not isinstance(M, int) or M < 1:
        raise ParseError(f'"M" must be a positive integer, got {M!r}')
    try:
        R = np.asarray(document["R"], dtype=np.float64)
        p = np.asarray(document["p"], dtype=np.float64)
    except (TypeError, ValueError) as err:
        raise ParseError(f"code entries must be numbers: {err}") from err
    if R.ndim != 2 or p.shape != (R.shape[0],):
        raise ParseError(f"R of shape {R.shape} does not match p of shape {p.shape}")
    return NsCode(M=M, R=R, p=p)


def save_code(code: NsCode, path: str | Path) -> None:
    """Write a code as JSON"""
    with open(path, "w", encoding="utf-8") as code_file:
        json.dump(code.to_json_dict(), code_file, indent=4)


def load_code(path: str | Path) -> NsCode:
    """Read a code written by `save_code`"""
    with open(path, "r", encoding="utf-8") as code_file:
        return parse_code(code_file.read())
