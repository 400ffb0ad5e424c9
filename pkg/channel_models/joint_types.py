"""Joint types of n-fold channel uses and their multiplicities

A joint type is the |A|x|B| matrix of counts N(a,b) of symbol pairs along an (input string, output
string) pair. Types are enumerated in descending lexicographic order of the flattened count matrix,
for (2,1,2) that is (2,0), (1,1), (0,2).
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammaln, logsumexp, xlogy

from channel_models.channel import Channel
from channel_models.errors import DimensionMismatch, DomainError, LimitExceeded

logger = logging.getLogger(__name__)

DEFAULT_TYPE_LIMIT = 2_000_000


@dataclass(frozen=True)
class JointType:
    """Counts n*tau(a,b) of one joint type"""

    counts: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        """Blocklength"""
        return sum(sum(row) for row in self.counts)

    @property
    def marginal_a(self) -> tuple[int, ...]:
        """Counts of each input symbol, the type of the input string"""
        return tuple(sum(row) for row in self.counts)

    @property
    def marginal_b(self) -> tuple[int, ...]:
        """Counts of each output symbol, the type of the output string"""
        return tuple(sum(column) for column in zip(*self.counts))

    def key(self) -> str:
        """Compact text key used when reduced witnesses are written to JSON"""
        return ";".join(",".join(str(count) for count in row) for row in self.counts)


class LogMultiplicities(NamedTuple):
    """Natural logs of |T_tau| and m(tau; tau_B)"""

    log_T: float
    log_m: float


def _log_factorial(counts: NDArray[np.int64]) -> NDArray[np.float64]:
    return gammaln(np.asarray(counts, dtype=np.float64) + 1.0)


def log_multiplicities(jt: JointType) -> LogMultiplicities:
    """Log sizes of the joint type class and of its section for a fixed output string

    |T_tau| = n! / prod_ab N(a,b)!
    m(tau; tau_B) = prod_b N_B(b)! / prod_a N(a,b)!, the number of input strings x forming joint
    type tau with one fixed output string y of type tau_B

    Args:
        jt (JointType): joint type

    Returns:
        LogMultiplicities: (log |T_tau|, log m)
    """
    counts = np.asarray(jt.counts, dtype=np.int64)
    cells = float(_log_factorial(counts).sum())
    log_t = float(gammaln(jt.n + 1.0)) - cells
    log_m = float(_log_factorial(counts.sum(axis=0)).sum()) - cells
    return LogMultiplicities(log_T=log_t, log_m=log_m)


def exact_multiplicities(jt: JointType) -> tuple[int, int]:
    """Big-integer |T_tau| and m(tau; tau_B)"""
    cells = math.prod(math.factorial(count) for row in jt.counts for count in row)
    size = math.factorial(jt.n) // cells
    section = math.prod(math.factorial(count) for count in jt.marginal_b) // cells
    return size, section


def count_joint_types(a_size: int, b_size: int, n: int) -> int:
    """Number of joint types, binomial(n + ab - 1, ab - 1)"""
    cells = a_size * b_size
    return math.comb(n + cells - 1, cells - 1)


def _compositions(n: int, parts: int) -> NDArray[np.int64]:
    """Every way to write n as an ordered sum of `parts` nonnegative integers, descending"""
    if parts == 1:
        return np.array([[n]], dtype=np.int64)
    slots = n + parts - 1
    bars = np.array(list(itertools.combinations(range(slots), parts - 1)), dtype=np.int64)
    bars = bars[::-1]
    edges = np.hstack(
        [
            np.full((len(bars), 1), -1, dtype=np.int64),
            bars,
            np.full((len(bars), 1), slots, dtype=np.int64),
        ]
    )
    return np.diff(edges, axis=1) - 1


@dataclass(frozen=True, eq=False)
class TypeTable:
    """All joint types for (|A|, |B|, n) with the multiplicities the reduced programs need

    counts: (K, |A|, |B|) count matrices in canonical order
    log_T, log_m: natural logs of |T_tau| and m(tau; tau_B) per joint type
    input_types / output_types: distinct marginal count vectors (ascending lex order)
    input_index / output_index: position of each joint type's marginals in those lists
    log_input_class / log_output_class: log |T_sigma| of each marginal type
    """

    a_size: int
    b_size: int
    n: int
    counts: NDArray[np.int64]
    log_T: NDArray[np.float64]
    log_m: NDArray[np.float64]
    input_types: NDArray[np.int64]
    input_index: NDArray[np.int64]
    output_types: NDArray[np.int64]
    output_index: NDArray[np.int64]
    log_input_class: NDArray[np.float64]
    log_output_class: NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.counts.shape[0])

    def joint_type(self, index: int) -> JointType:
        """JointType at a position of the table"""
        return JointType(counts=tuple(tuple(int(c) for c in row) for row in self.counts[index]))

    def log_channel_weights(self, channel: Channel) -> NDArray[np.float64]:
        """log E^n(tau) = sum_ab N(a,b) log E(b|a), -inf where a used cell has E(b|a) = 0

        Raises:
            DimensionMismatch: channel alphabets differ from the table
        """
        if channel.shape != (self.a_size, self.b_size):
            raise DimensionMismatch(
                f"table is for {self.a_size}x{self.b_size} channels, got {channel.shape}"
            )
        with np.errstate(divide="ignore"):
            terms = xlogy(self.counts, channel.matrix[np.newaxis, :, :])
        return np.asarray(terms.reshape(len(self), -1).sum(axis=1), dtype=np.float64)

    def stochasticity_residual(self, channel: Channel) -> float:
        """Largest deviation from 1 of sum_tau (|T_tau| / |T_sigma|) E^n(tau) over input types sigma

        |T_tau| / |T_sigma| counts the output strings forming type tau with one input string of type
        sigma, so every sum is the total probability of one row of E^n.
        """
        log_terms = self.log_T - self.log_input_class[self.input_index]
        log_terms = log_terms + self.log_channel_weights(channel)
        worst = 0.0
        for sigma in range(len(self.input_types)):
            members = log_terms[self.input_index == sigma]
            worst = max(worst, abs(math.expm1(float(logsumexp(members)))))
        return worst


def _log_multinomial(types: NDArray[np.int64], n: int) -> NDArray[np.float64]:
    return np.asarray(gammaln(n + 1.0) - _log_factorial(types).sum(axis=1), dtype=np.float64)


def enumerate_joint_types(
    a_size: int, b_size: int, n: int, limit: int = DEFAULT_TYPE_LIMIT
) -> TypeTable:
    """Enumerate every joint type of length-n string pairs over A x B

    Example:
        ```
        table = enumerate_joint_types(2, 2, 2)
        len(table)  # 10
        ```

    Args:
        a_size (int): |A|
        b_size (int): |B|
        n (int): blocklength
        limit (int, optional): largest accepted number of types. Defaults to 2e6.

    Raises:
        DomainError: nonpositive sizes or blocklength
        LimitExceeded: more than `limit` types

    Returns:
        TypeTable: complete duplicate free table in descending lexicographic order
    """
    if a_size < 1 or b_size < 1 or n < 1:
        raise DomainError(f"need |A|, |B|, n >= 1, got {a_size}, {b_size}, {n}")
    total = count_joint_types(a_size, b_size, n)
    if total > limit:
        raise LimitExceeded(
            f"{total} joint types for |A|={a_size}, |B|={b_size}, n={n} exceed the limit {limit}"
        )
    logger.debug("enumerating %d joint types (|A|=%d, |B|=%d, n=%d)", total, a_size, b_size, n)

    flat = _compositions(n, a_size * b_size)
    counts = flat.reshape(-1, a_size, b_size)
    cells = _log_factorial(flat).sum(axis=1)
    marginal_a = counts.sum(axis=2)
    marginal_b = counts.sum(axis=1)
    log_t = gammaln(n + 1.0) - cells
    log_m = _log_factorial(marginal_b).sum(axis=1) - cells

    input_types, input_index = np.unique(marginal_a, axis=0, return_inverse=True)
    output_types, output_index = np.unique(marginal_b, axis=0, return_inverse=True)
    return TypeTable(
        a_size=a_size,
        b_size=b_size,
        n=n,
        counts=counts,
        log_T=np.asarray(log_t, dtype=np.float64),
        log_m=np.asarray(log_m, dtype=np.float64),
        input_types=input_types,
        input_index=np.asarray(input_index, dtype=np.int64).reshape(-1),
        output_types=output_types,
        output_index=np.asarray(output_index, dtype=np.int64).reshape(-1),
        log_input_class=_log_multinomial(input_types, n),
        log_output_class=_log_multinomial(output_types, n),
    )
