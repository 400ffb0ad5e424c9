"""Discrete channel data model: validation, JSON files and explicit tensor powers"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from channel_models.errors import (
    ChannelError,
    EmptyMatrix,
    NegativeEntry,
    ParseError,
    RowSumMismatch,
    SizeLimitExceeded,
)

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
DEFAULT_EXPLICIT_LIMIT = 10**7


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic conditional distribution E(y|x) over finite alphabets

    Rows are indexed by inputs x and columns by outputs y. `exact_matrix` is only present when the
    channel was read from decimal text (or rationals) in exact mode, it holds the same probabilities
    as `matrix` as Fractions.
    """

    matrix: NDArray[np.float64]
    input_labels: tuple[str, ...]
    output_labels: tuple[str, ...]
    exact_matrix: tuple[tuple[Fraction, ...], ...] | None = None

    @property
    def input_size(self) -> int:
        """|A|, number of channel inputs"""
        return int(self.matrix.shape[0])

    @property
    def output_size(self) -> int:
        """|B|, number of channel outputs"""
        return int(self.matrix.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        """(|A|, |B|)"""
        return self.input_size, self.output_size

    def rational_matrix(self) -> NDArray[np.object_]:
        """Transition probabilities as an object array of Fractions

        Uses the decimal text the channel was read from when available, otherwise the exact binary
        value of each float.

        Returns:
            NDArray[np.object_]: |A|x|B| array of Fractions
        """
        if self.exact_matrix is not None:
            return np.array(self.exact_matrix, dtype=object)
        rational = np.empty(self.matrix.shape, dtype=object)
        for index, value in np.ndenumerate(self.matrix):
            rational[index] = Fraction(float(value))
        return rational

    def to_json_dict(self) -> dict[str, Any]:
        """Channel file representation, see `parse_channel`"""
        if self.exact_matrix is not None:
            rows: list[list[Any]] = [[str(value) for value in row] for row in self.exact_matrix]
        else:
            rows = self.matrix.tolist()
        return {
            "input_labels": list(self.input_labels),
            "output_labels": list(self.output_labels),
            "matrix": rows,
        }


def _as_rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    # repr gives the shortest decimal that round-trips, i.e. the text the user wrote
    return Fraction(repr(float(value)))


def _default_labels(labels: Sequence[Any] | None, size: int, kind: str) -> tuple[str, ...]:
    if labels is None:
        return tuple(str(index) for index in range(size))
    if len(labels) != size:
        raise ChannelError(f"{len(labels)} {kind} labels given for {size} {kind}s")
    return tuple(str(label) for label in labels)


def validate_channel(
    matrix: Sequence[Sequence[Any]] | NDArray[Any],
    input_labels: Sequence[Any] | None = None,
    output_labels: Sequence[Any] | None = None,
    exact: bool = False,
) -> Channel:
    """Check a matrix of transition probabilities and build a Channel from it

    Each row must be nonnegative and sum to one within 1e-12. Accepted rows are renormalized once
    so later programs see rows summing to one. With `exact` (or when any entry is a Fraction or a
    decimal string) the rational values are kept alongside the floats.

    Example:
        ```
        bsc = validate_channel([[0.9, 0.1], [0.1, 0.9]])
        ```

    Args:
        matrix (Sequence[Sequence[Any]]): rows E(.|x), one per input
        input_labels (Sequence[Any], optional): names of the inputs. Defaults to indices.
        output_labels (Sequence[Any], optional): names of the outputs. Defaults to indices.
        exact (bool, optional): keep rational values. Defaults to False.

    Raises:
        EmptyMatrix: no rows or no columns
        NegativeEntry: an entry below zero
        RowSumMismatch: a row does not sum to one

    Returns:
        Channel: validated channel
    """
    rows = [list(row) for row in matrix]
    if not rows or not rows[0]:
        raise EmptyMatrix("channel matrix must have at least one row and one column")
    width = len(rows[0])
    for index, row in enumerate(rows):
        if len(row) != width:
            raise ChannelError(f"row {index} has {len(row)} entries, expected {width}")

    keep_exact = exact or any(isinstance(value, (Fraction, str)) for row in rows for value in row)
    try:
        values = np.array([[float(value) for value in row] for row in rows], dtype=np.float64)
    except (TypeError, ValueError) as err:
        raise ChannelError(f"channel entries must be numbers: {err}") from err
    if not np.all(np.isfinite(values)):
        raise ChannelError("channel entries must be finite")
    values = values + 0.0  # folds -0.0 into 0.0

    negative = np.argwhere(values < 0)
    if negative.size:
        row_index, col_index = (int(i) for i in negative[0])
        raise NegativeEntry(row_index, col_index, float(values[row_index, col_index]))
    sums = values.sum(axis=1)
    for index, total in enumerate(sums):
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise RowSumMismatch(index, float(total - 1.0))

    exact_rows = None
    if keep_exact:
        rational_rows = []
        for row in rows:
            rational = [_as_rational(value) + 0 for value in row]
            total = sum(rational, Fraction(0))
            rational_rows.append(tuple(value / total for value in rational))
        exact_rows = tuple(rational_rows)
        values = np.array([[float(value) for value in row] for row in exact_rows])
    else:
        values = values / sums[:, np.newaxis]

    values.setflags(write=False)
    return Channel(
        matrix=values,
        input_labels=_default_labels(input_labels, values.shape[0], "input"),
        output_labels=_default_labels(output_labels, values.shape[1], "output"),
        exact_matrix=exact_rows,
    )


def _outer_block(first: NDArray[Any], second: NDArray[Any]) -> NDArray[Any]:
    """Kronecker product with the first factor's index most significant (works for object arrays)"""
    rows_a, cols_a = first.shape
    rows_b, cols_b = second.shape
    outer = np.multiply.outer(first, second).transpose(0, 2, 1, 3)
    return outer.reshape(rows_a * rows_b, cols_a * cols_b)


def _join_labels(first: tuple[str, ...], second: tuple[str, ...]) -> tuple[str, ...]:
    separator = "" if all(len(label) == 1 for label in first + second) else ","
    return tuple(f"{a}{separator}{b}" for a in first for b in second)


def tensor_product(first: Channel, second: Channel) -> Channel:
    """Channel that uses `first` and `second` independently on a pair of inputs

    Args:
        first (Channel): channel on the most significant symbol
        second (Channel): channel on the least significant symbol

    Returns:
        Channel: product channel E(y1 y2 | x1 x2) = E1(y1|x1) E2(y2|x2)
    """
    matrix = _outer_block(first.matrix, second.matrix)
    exact_rows = None
    if first.exact_matrix is not None and second.exact_matrix is not None:
        block = _outer_block(first.rational_matrix(), second.rational_matrix())
        exact_rows = tuple(tuple(row) for row in block)
    matrix.setflags(write=False)
    return Channel(
        matrix=matrix,
        input_labels=_join_labels(first.input_labels, second.input_labels),
        output_labels=_join_labels(first.output_labels, second.output_labels),
        exact_matrix=exact_rows,
    )


def tensor_power(channel: Channel, n: int, limit: int = DEFAULT_EXPLICIT_LIMIT) -> Channel:
    """Explicit n-fold memoryless use of a channel

    Input strings are ordered lexicographically with the leftmost symbol most significant, the same
    order is used for output strings.

    Args:
        channel (Channel): single use of the channel
        n (int): number of uses
        limit (int, optional): largest accepted number of matrix entries |A|^n |B|^n.
        Defaults to 10^7.

    Raises:
        SizeLimitExceeded: the explicit matrix would exceed `limit` entries

    Returns:
        Channel: channel over strings of length n
    """
    if n < 1:
        raise ChannelError(f"blocklength must be positive, got {n}")
    log_entries = n * (math.log(channel.input_size) + math.log(channel.output_size))
    if log_entries > math.log(limit) + 1e-12:
        raise SizeLimitExceeded(
            f"E^{n} would have {channel.input_size}^{n} x {channel.output_size}^{n} entries "
            f"(limit {limit}); use the type-reduced programs instead"
        )
    power = channel
    for _ in range(n - 1):
        power = tensor_product(power, channel)
    return power


def _reject_constant(name: str) -> None:
    raise ParseError(f"{name} is not an allowed channel entry")


def _parse_entry(value: Any) -> int | float | Fraction:
    """Number of a channel file, "num/den" strings as written for exact channels"""
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as err:
            raise ParseError(f"channel entry {value!r} is not a number") from err
    if isinstance(value, bool) or not isinstance(value, (int, float, Fraction)):
        raise ParseError(f"channel entry {value!r} is not a number")
    return value


def parse_channel(text: str, exact: bool = False) -> Channel:
    """Parse the channel file format

    Format:
        {"input_labels": [...], "output_labels": [...], "matrix": [[...], ...]}

    Labels are optional. NaN and infinities are rejected. In exact mode numbers are read from their
    decimal text into Fractions without passing through floats.

    Args:
        text (str): JSON document
        exact (bool, optional): read entries as rationals. Defaults to False.

    Raises:
        ParseError: malformed document

    Returns:
        Channel: validated channel
    """
    try:
        document = json.loads(
            text,
            parse_float=Fraction if exact else float,
            parse_constant=_reject_constant,
        )
    except json.JSONDecodeError as err:
        raise ParseError(f"channel file is not valid JSON: {err}") from err
    if not isinstance(document, dict) or "matrix" not in document:
        raise ParseError('channel file must be an object with a "matrix" entry')
    matrix = document["matrix"]
    if not isinstance(matrix, list) or not all(isinstance(row, list) for row in matrix):
        raise ParseError('"matrix" must be a list of rows')
    entries = [[_parse_entry(value) for value in row] for row in matrix]
    return validate_channel(
        entries,
        document.get("input_labels"),
        document.get("output_labels"),
        exact=exact,
    )


def load_channel(path: str | Path, exact: bool = False) -> Channel:
    """Read a channel file from disk, see `parse_channel`"""
    with open(path, "r", encoding="utf-8") as channel_file:
        return parse_channel(channel_file.read(), exact=exact)


def save_channel(channel: Channel, path: str | Path) -> None:
    """Write a channel file that `load_channel` reads back"""
    with open(path, "w", encoding="utf-8") as channel_file:
        json.dump(channel.to_json_dict(), channel_file, indent=4)
