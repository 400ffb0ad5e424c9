"""Channel hypergraph with its fractional packing and covering programs"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from channel_models.channel import Channel
from channel_models.errors import DimensionMismatch, DomainError, SolverFailure
from linear_programs.lp_core import LpSolution, ProgramBuilder, SolverOptions, solve_lp

logger = logging.getLogger(__name__)

FLOOR_SAFEGUARD = 1e-6


@dataclass(frozen=True)
class Hypergraph:
    """Vertices are channel inputs, each output y contributes the edge e_y = {x : E(y|x) > tol}

    edges are deduplicated and sorted, edge_origin[y] is the index of e_y in edges or None when
    column y has no support at all.
    """

    vertex_count: int
    edges: tuple[frozenset[int], ...]
    edge_origin: tuple[int | None, ...]

    def edge_list(self) -> list[list[int]]:
        """Edges as sorted vertex lists in sorted order"""
        return [sorted(edge) for edge in self.edges]

    def __str__(self) -> str:
        shown = " ".join("{" + ",".join(str(x) for x in edge) + "}" for edge in self.edge_list())
        return f"H(vertices={self.vertex_count}, edges={shown})"


@dataclass(frozen=True)
class PackingResult:
    """Optimum of the packing (alpha*) or covering (omega*) program

    weights are per vertex for packing and per edge (in `Hypergraph.edges` order) for covering.
    """

    kind: str
    value: Any
    weights: NDArray[Any]
    iterations: int


@dataclass(frozen=True)
class ZeroErrorResult:
    """alpha*(H(E)) and the zero-error code size floor(alpha*)"""

    alpha_star: Any
    M0: int
    packing: PackingResult


def hypergraph(channel: Channel, support_tol: float = 0.0) -> Hypergraph:
    """Build the channel hypergraph H(E)

    Example:
        ```
        hypergraph(make_standard("typewriter", 5, 0.5)).edge_list()
        # [[0, 1], [0, 4], [1, 2], [2, 3], [3, 4]]
        ```

    Args:
        channel (Channel): channel
        support_tol (float, optional): entries strictly above this count as nonzero. Defaults to 0.

    Raises:
        DomainError: negative support tolerance

    Returns:
        Hypergraph: deduplicated edges with the edge each output maps to
    """
    if support_tol < 0:
        raise DomainError(f"support tolerance must be >= 0, got {support_tol}")
    supports: list[frozenset[int] | None] = []
    for y in range(channel.output_size):
        edge = frozenset(int(x) for x in np.flatnonzero(channel.matrix[:, y] > support_tol))
        supports.append(edge or None)
    edges = tuple(
        sorted({edge for edge in supports if edge is not None}, key=lambda edge: sorted(edge))
    )
    position = {edge: index for index, edge in enumerate(edges)}
    origin = tuple(None if edge is None else position[edge] for edge in supports)
    if len(edges) < channel.output_size:
        logger.debug("%d outputs share %d distinct edges", channel.output_size, len(edges))
    return Hypergraph(vertex_count=channel.input_size, edges=edges, edge_origin=origin)


def _require_optimal(solution: LpSolution, what: str) -> LpSolution:
    if not solution.optimal:
        raise SolverFailure(f"{what} program finished with status {solution.status}")
    return solution


def fractional_packing(
    h: Hypergraph, mode: str = "float", options: SolverOptions | None = None
) -> PackingResult:
    """alpha*(H): largest total vertex weight with weights in [0, 1] and at most 1 on every edge

    Args:
        h (Hypergraph): hypergraph
        mode (str, optional): "float" or "exact". Defaults to "float".
        options (SolverOptions, optional): solver settings

    Returns:
        PackingResult: alpha* with per-vertex weights
    """
    builder = ProgramBuilder("max", exact=mode == "exact")
    weights = builder.add_variables("v", h.vertex_count, objective=1, upper=1)
    rows: list[int] = []
    cols: list[int] = []
    for index, edge in enumerate(h.edges):
        for x in sorted(edge):
            rows.append(index)
            cols.append(int(weights[x]))
    builder.add_rows("edge", len(h.edges), rows, cols, 1, "<=", 1)
    solution = _require_optimal(solve_lp(builder.build(), mode, options), "packing")
    return PackingResult(
        kind="packing",
        value=solution.objective,
        weights=solution.variables("v"),
        iterations=solution.iterations,
    )


def fractional_covering(
    h: Hypergraph, mode: str = "float", options: SolverOptions | None = None
) -> PackingResult:
    """omega*(H): smallest total edge weight giving every vertex weight at least 1

    Args:
        h (Hypergraph): hypergraph
        mode (str, optional): "float" or "exact". Defaults to "float".
        options (SolverOptions, optional): solver settings

    Raises:
        SolverFailure: a vertex lies in no edge, so no covering exists

    Returns:
        PackingResult: omega* with per-edge weights
    """
    builder = ProgramBuilder("min", exact=mode == "exact")
    weights = builder.add_variables("c", len(h.edges), objective=1)
    rows: list[int] = []
    cols: list[int] = []
    for index, edge in enumerate(h.edges):
        for x in sorted(edge):
            rows.append(x)
            cols.append(int(weights[index]))
    builder.add_rows("vertex", h.vertex_count, rows, cols, 1, ">=", 1)
    solution = _require_optimal(solve_lp(builder.build(), mode, options), "covering")
    return PackingResult(
        kind="covering",
        value=solution.objective,
        weights=solution.variables("c"),
        iterations=solution.iterations,
    )


def alpha_star_p(channel: Channel, p: Sequence[float], support_tol: float = 0.0) -> float:
    """alpha*(E, p) = 1 / max_y sum_x [E(y|x) > 0] p(x)

    Args:
        channel (Channel): channel
        p (Sequence[float]): input distribution
        support_tol (float, optional): support threshold as in `hypergraph`. Defaults to 0.

    Raises:
        DimensionMismatch: p does not have one entry per input
        DomainError: p is not a distribution

    Returns:
        float: alpha*(E, p)
    """
    dist = np.asarray(p, dtype=np.float64)
    if dist.shape != (channel.input_size,):
        raise DimensionMismatch(f"p needs {channel.input_size} entries, got {dist.shape}")
    if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-9:
        raise DomainError("p must be a probability distribution")
    support = (channel.matrix > support_tol).astype(np.float64)
    heaviest = float((dist @ support).max())
    return 1.0 / heaviest


def zero_error_size(
    channel: Channel,
    mode: str = "float",
    options: SolverOptions | None = None,
    support_tol: float = 0.0,
) -> ZeroErrorResult:
    """Zero-error NS code size M0 = floor(alpha*(H(E)))

    Args:
        channel (Channel): channel
        mode (str, optional): "float" or "exact". Defaults to "float".
        options (SolverOptions, optional): solver settings
        support_tol (float, optional): support threshold. Defaults to 0.

    Returns:
        ZeroErrorResult: alpha* and M0
    """
    packing = fractional_packing(hypergraph(channel, support_tol), mode, options)
    if isinstance(packing.value, Fraction):
        largest = math.floor(packing.value)
    else:
        largest = math.floor(float(packing.value) + FLOOR_SAFEGUARD)
    return ZeroErrorResult(alpha_star=packing.value, M0=int(largest), packing=packing)
