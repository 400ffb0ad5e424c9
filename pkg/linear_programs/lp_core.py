"""Dense two-phase simplex solver with a floating point and an exact rational mode

Every program of the package goes through this module. Programs are stored as sparse triplets so
that the large type-reduced programs can be handed to HiGHS, the dense tableau is only formed when a
program is solved in `float` or `exact` mode.

Dual values follow one convention everywhere: the dual of a row is the shadow price
d(objective)/d(rhs).
In a max problem the duals of <= rows are >= 0 and the duals of >= rows are <= 0, equality rows are
free. Upper bounds on variables get their own duals (`bound_duals`).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import sparse
from scipy.optimize import linprog

from channel_models.errors import DimensionMismatch, IterationLimit, NumericalBreakdown

logger = logging.getLogger(__name__)

ROW_KINDS = ("<=", "=", ">=")
MODES = ("float", "exact", "highs", "auto")


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and limits of the simplex method

    feasibility_tol: largest accepted constraint violation (scaled by the size of the rhs)
    reduced_cost_tol: reduced costs above -tol count as optimal
    duality_gap_tol: accepted |primal - dual| objective gap (relative to max(1, |objective|))
    pivot_tol: smallest pivot element accepted by the ratio test
    stall_threshold: consecutive degenerate pivots before Bland's rule takes over
    iteration_limit: total pivots over both phases
    dense_cell_limit: largest tableau solved densely when mode is "auto"
    """

    feasibility_tol: float = 1e-9
    reduced_cost_tol: float = 1e-9
    duality_gap_tol: float = 1e-8
    pivot_tol: float = 1e-11
    stall_threshold: int = 50
    iteration_limit: int = 100_000
    dense_cell_limit: int = 4_000_000


def _rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    return Fraction(repr(float(value)))


def _as_values(values: Iterable[Any], exact: bool) -> NDArray[Any]:
    if exact:
        return np.array([_rational(value) for value in values], dtype=object)
    return np.asarray([float(value) for value in values], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Linear program with sparse storage

    Rows are `row_index`/`col_index`/`values` triplets (duplicates are summed), each row has a kind
    in ("<=", "=", ">=") and a right hand side. Variables have finite lower bounds and optional
    upper bounds (`has_upper`). Named blocks of variables and rows map a name to a half open index
    range and are used to pull certificates out of a solution.
    """

    sense: str
    objective: NDArray[Any]
    row_index: NDArray[np.int64]
    col_index: NDArray[np.int64]
    values: NDArray[Any]
    kinds: tuple[str, ...]
    rhs: NDArray[Any]
    lower: NDArray[Any]
    upper: NDArray[Any]
    has_upper: NDArray[np.bool_]
    variable_blocks: dict[str, tuple[int, int]] = field(default_factory=dict)
    row_blocks: dict[str, tuple[int, int]] = field(default_factory=dict)
    exact: bool = False

    def __post_init__(self) -> None:
        if self.sense not in ("max", "min"):
            raise ValueError(f"sense must be 'max' or 'min', got {self.sense!r}")
        if len(self.kinds) != len(self.rhs):
            raise DimensionMismatch("every row needs a kind and a right hand side")
        if any(kind not in ROW_KINDS for kind in self.kinds):
            raise ValueError(f"row kinds must be among {ROW_KINDS}")
        n = len(self.objective)
        if len(self.lower) != n or len(self.upper) != n or len(self.has_upper) != n:
            raise DimensionMismatch("bounds must have the width of the objective")
        if not len(self.row_index) == len(self.col_index) == len(self.values):
            raise DimensionMismatch("triplet arrays must have equal length")
        if len(self.col_index) and (self.col_index.min() < 0 or self.col_index.max() >= n):
            raise DimensionMismatch("row coefficient outside the objective width")
        if len(self.row_index) and (
            self.row_index.min() < 0 or self.row_index.max() >= self.num_rows
        ):
            raise DimensionMismatch("coefficient refers to a missing row")
        if not self.exact:
            finite = [self.objective, self.values, self.rhs, self.lower]
            if not all(np.all(np.isfinite(np.asarray(array, dtype=float))) for array in finite):
                raise ValueError("linear program coefficients must be finite")

    @property
    def num_variables(self) -> int:
        """Number of variables (width of the objective)"""
        return len(self.objective)

    @property
    def num_rows(self) -> int:
        """Number of constraint rows (bounds excluded)"""
        return len(self.kinds)

    def dense_matrix(self) -> NDArray[Any]:
        """Constraint matrix as a dense float or Fraction array"""
        if self.exact:
            matrix = np.empty((self.num_rows, self.num_variables), dtype=object)
            matrix.fill(Fraction(0))
            for row, col, value in zip(self.row_index, self.col_index, self.values):
                matrix[row, col] += value
            return matrix
        matrix = np.zeros((self.num_rows, self.num_variables))
        np.add.at(matrix, (self.row_index, self.col_index), self.values)
        return matrix

    def sparse_matrix(self) -> sparse.csr_matrix:
        """Constraint matrix as a float CSR matrix"""
        return sparse.coo_matrix(
            (np.asarray(self.values, dtype=float), (self.row_index, self.col_index)),
            shape=(self.num_rows, self.num_variables),
        ).tocsr()

    def row_label(self, row: int) -> str:
        """Readable name of a row, block name and index within the block"""
        for name, (start, stop) in self.row_blocks.items():
            if start <= row < stop:
                return f"{name}[{row - start}]" if stop - start > 1 else name
        return f"row[{row}]"

    def as_exact(self) -> LinearProgram:
        """Copy with Fraction coefficients, floats are read from their shortest decimal text"""
        if self.exact:
            return self
        return LinearProgram(
            sense=self.sense,
            objective=_as_values(self.objective, True),
            row_index=self.row_index,
            col_index=self.col_index,
            values=_as_values(self.values, True),
            kinds=self.kinds,
            rhs=_as_values(self.rhs, True),
            lower=_as_values(self.lower, True),
            upper=_as_values(np.where(self.has_upper, self.upper, 0.0), True),
            has_upper=self.has_upper,
            variable_blocks=self.variable_blocks,
            row_blocks=self.row_blocks,
            exact=True,
        )

    def as_float(self) -> LinearProgram:
        """Copy of this program with float coefficients"""
        if not self.exact:
            return self
        return LinearProgram(
            sense=self.sense,
            objective=_as_values(self.objective, False),
            row_index=self.row_index,
            col_index=self.col_index,
            values=_as_values(self.values, False),
            kinds=self.kinds,
            rhs=_as_values(self.rhs, False),
            lower=_as_values(self.lower, False),
            upper=np.where(self.has_upper, _as_values(self.upper, False), np.inf),
            has_upper=self.has_upper,
            variable_blocks=self.variable_blocks,
            row_blocks=self.row_blocks,
            exact=False,
        )


class ProgramBuilder:
    """Collect variables and rows block by block and assemble a LinearProgram

    Example:
        ```
        builder = ProgramBuilder("max")
        x = builder.add_variables("x", 2, objective=[1, 1])
        builder.add_row("total", x, [1, 1], "<=", 1)
        builder.add_row("cap", x[:1], [1], "<=", 0.25)
        solution = solve_lp(builder.build())
        ```
    """

    def __init__(self, sense: str, exact: bool = False):
        self.sense = sense
        self.exact = exact
        self._objective: list[NDArray[Any]] = []
        self._lower: list[NDArray[Any]] = []
        self._upper: list[NDArray[Any]] = []
        self._has_upper: list[NDArray[np.bool_]] = []
        self._rows: list[NDArray[np.int64]] = []
        self._cols: list[NDArray[np.int64]] = []
        self._values: list[NDArray[Any]] = []
        self._kinds: list[str] = []
        self._rhs: list[Any] = []
        self.num_variables = 0
        self.variable_blocks: dict[str, tuple[int, int]] = {}
        self.row_blocks: dict[str, tuple[int, int]] = {}

    def _broadcast(self, value: Any, count: int) -> NDArray[Any]:
        if np.ndim(value) == 0:
            return _as_values([value] * count, self.exact)
        values = list(value)
        if len(values) != count:
            raise DimensionMismatch(f"expected {count} values, got {len(values)}")
        return _as_values(values, self.exact)

    def add_variables(
        self,
        name: str,
        count: int,
        objective: Any = 0,
        lower: Any = 0,
        upper: Any = None,
    ) -> NDArray[np.int64]:
        """Add a named block of variables

        Args:
            name (str): block name used to read the values back
            count (int): number of variables
            objective (Any, optional): scalar or per-variable objective coefficients. Defaults to 0.
            lower (Any, optional): scalar or per-variable lower bounds. Defaults to 0.
            upper (Any, optional): scalar or per-variable upper bounds, None for no bound.
            Defaults to None.

        Returns:
            NDArray[np.int64]: column indices of the new variables
        """
        if name in self.variable_blocks:
            raise ValueError(f"variable block {name!r} already exists")
        start = self.num_variables
        self._objective.append(self._broadcast(objective, count))
        self._lower.append(self._broadcast(lower, count))
        if upper is None:
            self._upper.append(self._broadcast(0, count))
            self._has_upper.append(np.zeros(count, dtype=bool))
        else:
            self._upper.append(self._broadcast(upper, count))
            self._has_upper.append(np.ones(count, dtype=bool))
        self.num_variables += count
        self.variable_blocks[name] = (start, self.num_variables)
        return np.arange(start, self.num_variables, dtype=np.int64)

    def add_rows(
        self,
        name: str,
        count: int,
        local_rows: Sequence[int] | NDArray[np.int64],
        columns: Sequence[int] | NDArray[np.int64],
        coefficients: Any,
        kind: str,
        rhs: Any,
    ) -> NDArray[np.int64]:
        """Add a named block of rows of one kind given as triplets

        Args:
            name (str): block name used to read duals back
            count (int): number of rows in the block
            local_rows (Sequence[int]): row of each coefficient, counted within the block
            columns (Sequence[int]): column of each coefficient
            coefficients (Any): value of each coefficient (scalar broadcasts)
            kind (str): "<=", "=" or ">="
            rhs (Any): scalar or per-row right hand side

        Returns:
            NDArray[np.int64]: global indices of the new rows
        """
        if kind not in ROW_KINDS:
            raise ValueError(f"row kind must be among {ROW_KINDS}, got {kind!r}")
        if name in self.row_blocks:
            raise ValueError(f"row block {name!r} already exists")
        local = np.asarray(local_rows, dtype=np.int64)
        cols = np.asarray(columns, dtype=np.int64)
        if len(local) != len(cols):
            raise DimensionMismatch("every coefficient needs a row and a column")
        if len(local) and (local.min() < 0 or local.max() >= count):
            raise DimensionMismatch(f"row block {name!r} has {count} rows")
        start = len(self._kinds)
        self._rows.append(local + start)
        self._cols.append(cols)
        self._values.append(self._broadcast(coefficients, len(cols)))
        self._kinds.extend([kind] * count)
        self._rhs.extend(self._broadcast(rhs, count))
        self.row_blocks[name] = (start, start + count)
        return np.arange(start, start + count, dtype=np.int64)

    def add_row(
        self,
        name: str,
        columns: Sequence[int] | NDArray[np.int64],
        coefficients: Any,
        kind: str,
        rhs: Any,
    ) -> int:
        """Add a single named row, see `add_rows`"""
        cols = np.asarray(columns, dtype=np.int64)
        local = np.zeros(len(cols), dtype=np.int64)
        rows = self.add_rows(name, 1, local, cols, coefficients, kind, rhs)
        return int(rows[0])

    def build(self) -> LinearProgram:
        """Assemble the program"""

        def joined(parts: list[NDArray[Any]], dtype: Any) -> NDArray[Any]:
            if not parts:
                return np.zeros(0, dtype=dtype)
            return np.concatenate(parts)

        value_type = object if self.exact else np.float64
        return LinearProgram(
            sense=self.sense,
            objective=joined(self._objective, value_type),
            row_index=joined(self._rows, np.int64),
            col_index=joined(self._cols, np.int64),
            values=joined(self._values, value_type),
            kinds=tuple(self._kinds),
            rhs=_as_values(self._rhs, self.exact),
            lower=joined(self._lower, value_type),
            upper=joined(self._upper, value_type),
            has_upper=joined(self._has_upper, bool),
            variable_blocks=dict(self.variable_blocks),
            row_blocks=dict(self.row_blocks),
            exact=self.exact,
        )


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Result of `solve_lp`

    status is "optimal", "infeasible" or "unbounded"; the vectors are only set when optimal.
    """

    status: str
    mode: str
    objective: Any = None
    dual_objective: Any = None
    primal: NDArray[Any] | None = None
    duals: NDArray[Any] | None = None
    bound_duals: NDArray[Any] | None = None
    iterations: int = 0
    bland_engaged: bool = False
    variable_blocks: dict[str, tuple[int, int]] = field(default_factory=dict)
    row_blocks: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        """True when an optimal primal/dual pair is available"""
        return self.status == "optimal"

    def variables(self, name: str) -> NDArray[Any]:
        """Primal values of a named variable block"""
        if self.primal is None:
            raise ValueError(f"no primal solution, status {self.status}")
        start, stop = self.variable_blocks[name]
        return self.primal[start:stop]

    def row_duals(self, name: str) -> NDArray[Any]:
        """Duals of a named row block"""
        if self.duals is None:
            raise ValueError(f"no dual solution, status {self.status}")
        start, stop = self.row_blocks[name]
        return self.duals[start:stop]

    @property
    def gap(self) -> float:
        """|primal objective - dual objective|"""
        if self.objective is None or self.dual_objective is None:
            return math.inf
        return float(abs(self.objective - self.dual_objective))


class _Tableau:
    """Dense simplex tableau of a max problem in equality form with nonnegative rhs

    Columns are laid out as [structural | logical (slack or surplus) | artificial], the last row
    holds reduced costs and the last column the rhs.
    """

    def __init__(
        self, matrix: NDArray[Any], kinds: list[str], rhs: NDArray[Any], exact: bool
    ) -> None:
        rows, structural = matrix.shape
        self.exact = exact
        self.zero: Any = Fraction(0) if exact else 0.0
        self.one: Any = Fraction(1) if exact else 1.0
        logical = [i for i, kind in enumerate(kinds) if kind != "="]
        artificial = [i for i, kind in enumerate(kinds) if kind != "<="]
        self.num_structural = structural
        self.logical_start = structural
        self.artificial_start = structural + len(logical)
        width = self.artificial_start + len(artificial)

        dtype = object if exact else np.float64
        standard = np.empty((rows, width), dtype=dtype)
        standard.fill(self.zero)
        standard[:, :structural] = matrix
        self.basis = np.zeros(rows, dtype=np.int64)
        for offset, row in enumerate(logical):
            col = self.logical_start + offset
            standard[row, col] = self.one if kinds[row] == "<=" else -self.one
            if kinds[row] == "<=":
                self.basis[row] = col
        for offset, row in enumerate(artificial):
            col = self.artificial_start + offset
            standard[row, col] = self.one
            self.basis[row] = col
        self.standard = standard
        self.rhs = rhs
        self.table = np.empty((rows + 1, width + 1), dtype=dtype)
        self.table.fill(self.zero)
        self.table[:rows, :width] = standard
        self.table[:rows, width] = rhs

    @property
    def num_rows(self) -> int:
        """Constraint rows of the tableau"""
        return int(self.table.shape[0] - 1)

    @property
    def width(self) -> int:
        """Number of columns excluding the rhs"""
        return int(self.table.shape[1] - 1)

    def set_costs(self, costs: NDArray[Any]) -> None:
        """Write the reduced cost row for the current basis and cost vector (max problem)"""
        basic_costs = costs[self.basis]
        body = self.table[:-1]
        self.table[-1, :-1] = basic_costs @ body[:, :-1] - costs
        self.table[-1, -1] = basic_costs @ body[:, -1]

    def pivot(self, row: int, col: int) -> None:
        """Make column `col` basic in row `row`"""
        table = self.table
        table[row] = table[row] / table[row, col]
        column = table[:, col].copy()
        column[row] = self.zero
        touched = np.flatnonzero(column != 0)
        if len(touched):
            table[touched] -= np.outer(column[touched], table[row])
        if not self.exact:
            table[touched, col] = 0.0
        self.basis[row] = col


class _Simplex:
    """Two-phase primal simplex with Dantzig pricing and Bland's rule after stalling"""

    def __init__(self, tableau: _Tableau, options: SolverOptions):
        self.tableau = tableau
        self.options = options
        exact = tableau.exact
        self.cost_tol = 0 if exact else options.reduced_cost_tol
        self.pivot_tol = 0 if exact else options.pivot_tol
        self.ratio_tol = 0 if exact else options.feasibility_tol
        self.iterations = 0
        self.bland = False

    def run(self, eligible: NDArray[np.bool_]) -> str:
        """Pivot until optimal or unbounded

        Args:
            eligible (NDArray[np.bool_]): columns allowed to enter the basis

        Raises:
            IterationLimit: total pivots exceeded the configured limit

        Returns:
            str: "optimal" or "unbounded"
        """
        table = self.tableau.table
        degenerate = 0
        while True:
            costs = table[-1, :-1]
            candidates = np.flatnonzero((costs < -self.cost_tol) & eligible)
            if not len(candidates):
                return "optimal"
            if self.bland:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmin(costs[candidates])])

            column = table[:-1, col]
            rows = np.flatnonzero(column > self.pivot_tol)
            if not len(rows):
                return "unbounded"
            rhs = table[rows, -1]
            if not self.tableau.exact:
                rhs = np.maximum(rhs, 0.0)
            ratios = rhs / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + self.ratio_tol]
            row = int(ties[np.argmin(self.tableau.basis[ties])])

            if self.iterations >= self.options.iteration_limit:
                raise IterationLimit(
                    f"simplex stopped after {self.iterations} pivots without reaching optimality"
                )
            self.tableau.pivot(row, col)
            self.iterations += 1

            if best <= self.ratio_tol:
                degenerate += 1
                if not self.bland and degenerate > self.options.stall_threshold:
                    logger.warning(
                        "%d degenerate pivots in a row, switching to Bland's rule", degenerate
                    )
                    self.bland = True
            else:
                degenerate = 0


def _solve_linear(matrix: NDArray[Any], rhs: NDArray[Any], exact: bool) -> NDArray[Any]:
    """Solve a square system, Gauss-Jordan on Fractions in exact mode"""
    if not exact:
        return np.linalg.solve(matrix.astype(float), rhs.astype(float))
    size = matrix.shape[0]
    work = [[matrix[i, j] for j in range(size)] + [rhs[i]] for i in range(size)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if work[r][col] != 0), None)
        if pivot is None:
            raise NumericalBreakdown("singular basis matrix")
        work[col], work[pivot] = work[pivot], work[col]
        lead = work[col][col]
        work[col] = [value / lead for value in work[col]]
        for r in range(size):
            if r != col and work[r][col] != 0:
                factor = work[r][col]
                work[r] = [a - factor * b for a, b in zip(work[r], work[col])]
    return np.array([work[i][size] for i in range(size)], dtype=object)


def _dense_solve(lp: LinearProgram, options: SolverOptions, mode: str) -> LpSolution:
    exact = mode == "exact"
    lp = lp.as_exact() if exact else lp.as_float()
    zero: Any = Fraction(0) if exact else 0.0
    sign = 1 if lp.sense == "max" else -1
    n = lp.num_variables

    # shift lower bounds to zero and turn upper bounds into rows
    matrix = lp.dense_matrix()
    lower = lp.lower
    upper_cols = np.flatnonzero(lp.has_upper)
    shifted_rhs = lp.rhs - matrix @ lower if n else lp.rhs.copy()
    bound_rows = np.empty((len(upper_cols), n), dtype=matrix.dtype)
    bound_rows.fill(zero)
    for offset, col in enumerate(upper_cols):
        bound_rows[offset, col] = Fraction(1) if exact else 1.0
    full = np.vstack([matrix, bound_rows]) if len(upper_cols) else matrix
    kinds = list(lp.kinds) + ["<="] * len(upper_cols)
    rhs = np.concatenate([shifted_rhs, lp.upper[upper_cols] - lower[upper_cols]])

    flips = np.ones(len(kinds), dtype=np.int64)
    for i, value in enumerate(rhs):
        if value < 0:
            flips[i] = -1
            full[i] = -full[i]
            rhs[i] = -value
            kinds[i] = {"<=": ">=", ">=": "<=", "=": "="}[kinds[i]]

    tableau = _Tableau(full, kinds, rhs, exact)
    simplex = _Simplex(tableau, options)
    width = tableau.width
    artificial = np.zeros(width, dtype=bool)
    artificial[tableau.artificial_start :] = True
    scale = max(1.0, float(max((abs(v) for v in rhs), default=0)))
    logger.debug(
        "dense simplex (%s): %d rows, %d columns", mode, tableau.num_rows, tableau.width
    )

    # phase 1
    if artificial.any():
        phase_costs = np.empty(width, dtype=object if exact else np.float64)
        phase_costs.fill(zero)
        phase_costs[artificial] = Fraction(-1) if exact else -1.0
        tableau.set_costs(phase_costs)
        simplex.run(np.ones(width, dtype=bool))
        infeasibility = -tableau.table[-1, -1]
        limit = 0 if exact else options.feasibility_tol * scale
        if infeasibility > limit:
            return LpSolution(
                status="infeasible",
                mode=mode,
                iterations=simplex.iterations,
                variable_blocks=lp.variable_blocks,
                row_blocks=lp.row_blocks,
            )
        for row in range(tableau.num_rows):
            if artificial[tableau.basis[row]]:
                entries = tableau.table[row, : tableau.artificial_start]
                nonzero = np.flatnonzero(abs(entries) > simplex.pivot_tol)
                if len(nonzero):
                    tableau.pivot(row, int(nonzero[0]))
        logger.debug("phase 1 finished after %d pivots", simplex.iterations)

    # phase 2
    costs = np.empty(width, dtype=object if exact else np.float64)
    costs.fill(zero)
    costs[:n] = sign * lp.objective
    tableau.set_costs(costs)
    status = simplex.run(~artificial)
    if status == "unbounded":
        return LpSolution(
            status="unbounded",
            mode=mode,
            iterations=simplex.iterations,
            bland_engaged=simplex.bland,
            variable_blocks=lp.variable_blocks,
            row_blocks=lp.row_blocks,
        )

    basis_matrix = tableau.standard[:, tableau.basis]
    basic_costs = costs[tableau.basis]
    if exact:
        basic_values = tableau.table[:-1, -1]
        standard_duals = _solve_linear(basis_matrix.T, basic_costs, True)
    else:
        try:
            basic_values = _solve_linear(basis_matrix, rhs, False)
            standard_duals = _solve_linear(basis_matrix.T, basic_costs, False)
        except np.linalg.LinAlgError as err:
            raise NumericalBreakdown(
                "basis matrix became singular, retry in exact mode"
            ) from err

    values = np.empty(width, dtype=object if exact else np.float64)
    values.fill(zero)
    values[tableau.basis] = basic_values
    primal = values[:n] + lower
    if not exact:
        primal = np.maximum(primal, lower)
        primal = np.where(lp.has_upper, np.minimum(primal, lp.upper), primal)

    all_duals = sign * flips * standard_duals
    duals = all_duals[: lp.num_rows]
    bound_duals = np.empty(n, dtype=object if exact else np.float64)
    bound_duals.fill(zero)
    bound_duals[upper_cols] = all_duals[lp.num_rows :]
    solution = _finish(lp, mode, primal, duals, bound_duals, simplex.iterations, simplex.bland)
    if not exact:
        _check_float_solution(lp, solution, options)
    return solution


def _finish(
    lp: LinearProgram,
    mode: str,
    primal: NDArray[Any],
    duals: NDArray[Any],
    bound_duals: NDArray[Any],
    iterations: int,
    bland: bool,
) -> LpSolution:
    objective = lp.objective @ primal if lp.num_variables else 0
    reduced = lp.objective - _transpose_product(lp, duals) - bound_duals
    upper_terms = lp.upper[lp.has_upper] @ bound_duals[lp.has_upper] if lp.has_upper.any() else 0
    dual_objective = lp.rhs @ duals + upper_terms + lp.lower @ reduced
    return LpSolution(
        status="optimal",
        mode=mode,
        objective=objective,
        dual_objective=dual_objective,
        primal=primal,
        duals=duals,
        bound_duals=bound_duals,
        iterations=iterations,
        bland_engaged=bland,
        variable_blocks=lp.variable_blocks,
        row_blocks=lp.row_blocks,
    )


def _transpose_product(lp: LinearProgram, duals: NDArray[Any]) -> NDArray[Any]:
    """A^T y straight from the triplets"""
    if lp.exact:
        result = np.empty(lp.num_variables, dtype=object)
        result.fill(Fraction(0))
        for row, col, value in zip(lp.row_index, lp.col_index, lp.values):
            result[col] += value * duals[row]
        return result
    result = np.zeros(lp.num_variables)
    np.add.at(result, lp.col_index, lp.values * np.asarray(duals, dtype=float)[lp.row_index])
    return result


def _check_float_solution(lp: LinearProgram, solution: LpSolution, options: SolverOptions) -> None:
    """Raise NumericalBreakdown when a float solution is clearly not optimal"""
    assert solution.primal is not None and solution.duals is not None
    loose = math.sqrt(options.feasibility_tol)
    scale = max(1.0, float(np.max(np.abs(lp.rhs), initial=0.0)))
    worst = _worst_violation(lp, solution.primal)
    if worst > loose * scale:
        raise NumericalBreakdown(
            f"primal solution violates a constraint by {worst:.3e}, retry in exact mode"
        )
    gap = solution.gap
    if gap > options.duality_gap_tol * max(1.0, abs(float(solution.objective))) * 1e3:
        raise NumericalBreakdown(f"duality gap {gap:.3e} is too large, retry in exact mode")


def _row_activity(lp: LinearProgram, point: NDArray[Any]) -> NDArray[Any]:
    if lp.exact:
        activity = np.empty(lp.num_rows, dtype=object)
        activity.fill(Fraction(0))
        for row, col, value in zip(lp.row_index, lp.col_index, lp.values):
            activity[row] += value * point[col]
        return activity
    activity = np.zeros(lp.num_rows)
    np.add.at(activity, lp.row_index, lp.values * np.asarray(point, dtype=float)[lp.col_index])
    return activity


def _row_slacks(lp: LinearProgram, point: NDArray[Any]) -> NDArray[Any]:
    """Slack of every row, negative when violated"""
    activity = _row_activity(lp, point)
    slacks = np.empty(lp.num_rows, dtype=activity.dtype)
    for row, kind in enumerate(lp.kinds):
        if kind == "<=":
            slacks[row] = lp.rhs[row] - activity[row]
        elif kind == ">=":
            slacks[row] = activity[row] - lp.rhs[row]
        else:
            slacks[row] = -abs(activity[row] - lp.rhs[row])
    return slacks


def _worst_violation(lp: LinearProgram, point: NDArray[Any]) -> float:
    slacks = np.asarray(_row_slacks(lp, point), dtype=float)
    worst = float(max(0.0, -slacks.min(initial=0.0)))
    below = np.asarray(lp.lower - point, dtype=float)
    worst = max(worst, float(below.max(initial=0.0)))
    if lp.has_upper.any():
        above = np.asarray(point[lp.has_upper] - lp.upper[lp.has_upper], dtype=float)
        worst = max(worst, float(above.max(initial=0.0)))
    return worst


def _solve_highs(lp: LinearProgram, options: SolverOptions) -> LpSolution:
    """Hand a (large, sparse) program to HiGHS through scipy and translate its duals"""
    lp = lp.as_float()
    sign = 1 if lp.sense == "min" else -1
    matrix = lp.sparse_matrix()
    kinds = np.array(lp.kinds)
    le_rows = np.flatnonzero(kinds == "<=")
    ge_rows = np.flatnonzero(kinds == ">=")
    eq_rows = np.flatnonzero(kinds == "=")
    inequality_rows = np.concatenate([le_rows, ge_rows])
    row_signs = np.concatenate([np.ones(len(le_rows)), -np.ones(len(ge_rows))])
    a_ub = sparse.diags(row_signs) @ matrix[inequality_rows] if len(inequality_rows) else None
    b_ub = row_signs * lp.rhs[inequality_rows] if len(inequality_rows) else None
    a_eq = matrix[eq_rows] if len(eq_rows) else None
    b_eq = lp.rhs[eq_rows] if len(eq_rows) else None
    upper = np.where(lp.has_upper, lp.upper, np.inf)
    bounds = np.column_stack([lp.lower, upper])
    logger.debug(
        "HiGHS: %d rows, %d columns, %d nonzeros", lp.num_rows, lp.num_variables, matrix.nnz
    )

    result = linprog(
        sign * lp.objective,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": max(options.feasibility_tol, 1e-10),
            "dual_feasibility_tolerance": max(options.reduced_cost_tol, 1e-10),
        },
    )
    blocks = {"variable_blocks": lp.variable_blocks, "row_blocks": lp.row_blocks}
    if result.status == 2:
        return LpSolution(status="infeasible", mode="highs", iterations=int(result.nit), **blocks)
    if result.status == 3:
        return LpSolution(status="unbounded", mode="highs", iterations=int(result.nit), **blocks)
    if result.status == 1:
        raise IterationLimit(f"HiGHS reached its iteration limit: {result.message}")
    if result.status != 0:
        raise NumericalBreakdown(f"HiGHS failed: {result.message}")

    duals = np.zeros(lp.num_rows)
    if len(inequality_rows):
        duals[inequality_rows] = sign * row_signs * result.ineqlin.marginals
    if len(eq_rows):
        duals[eq_rows] = sign * result.eqlin.marginals
    bound_duals = np.where(lp.has_upper, sign * result.upper.marginals, 0.0)
    return _finish(lp, "highs", np.asarray(result.x), duals, bound_duals, int(result.nit), False)


def choose_mode(lp: LinearProgram, options: SolverOptions | None = None) -> str:
    """Pick "float" for programs whose dense tableau fits `dense_cell_limit`, "highs" otherwise"""
    options = options or SolverOptions()
    rows = lp.num_rows + int(lp.has_upper.sum())
    cells = (rows + 1) * (lp.num_variables + 2 * rows + 1)
    return "float" if cells <= options.dense_cell_limit else "highs"


def solve_lp(
    lp: LinearProgram, mode: str = "float", options: SolverOptions | None = None
) -> LpSolution:
    """Solve a linear program

    Modes:
        float: dense two-phase simplex in double precision
        exact: the same pivoting on Fractions, every returned value is exact
        highs: scipy's HiGHS interface, for programs too large for a dense tableau
        auto: float or highs depending on `dense_cell_limit`

    Args:
        lp (LinearProgram): program to solve
        mode (str, optional): one of the modes above. Defaults to "float".
        options (SolverOptions, optional): tolerances and limits. Defaults to SolverOptions().

    Raises:
        NumericalBreakdown: the float solution failed its final check
        IterationLimit: the pivot limit was reached

    Returns:
        LpSolution: status, primal and dual values
    """
    options = options or SolverOptions()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "auto":
        mode = choose_mode(lp, options)
    if mode == "highs":
        return _solve_highs(lp, options)
    return _dense_solve(lp, options, mode)


@dataclass(frozen=True)
class Violation:
    """One violated constraint of a point

    kind: "row", "lower" or "upper"
    index: row or variable index
    label: readable name
    slack: negative amount by which the constraint fails
    """

    kind: str
    index: int
    label: str
    slack: Any


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of `check_point`"""

    feasible: bool
    objective: Any
    violations: list[Violation]
    tight_rows: list[int]


def check_point(lp: LinearProgram, point: Sequence[Any], tol: float = 1e-9) -> FeasibilityReport:
    """Evaluate a point against every row and bound of a program

    Args:
        lp (LinearProgram): program
        point (Sequence[Any]): one value per variable
        tol (float, optional): accepted violation. Defaults to 1e-9.

    Raises:
        DimensionMismatch: point width differs from the program

    Returns:
        FeasibilityReport: violated rows and bounds with their slacks, tight rows and the objective
    """
    if len(point) != lp.num_variables:
        raise DimensionMismatch(f"point has {len(point)} entries, program has {lp.num_variables}")
    values = _as_values(point, lp.exact)
    slacks = _row_slacks(lp, values)
    violations = [
        Violation("row", row, lp.row_label(row), slack)
        for row, slack in enumerate(slacks)
        if slack < -tol
    ]
    tight = [row for row, slack in enumerate(slacks) if abs(slack) <= tol]
    for col in range(lp.num_variables):
        if values[col] < lp.lower[col] - tol:
            violations.append(Violation("lower", col, f"x[{col}]", values[col] - lp.lower[col]))
        if lp.has_upper[col] and values[col] > lp.upper[col] + tol:
            violations.append(Violation("upper", col, f"x[{col}]", lp.upper[col] - values[col]))
    objective = lp.objective @ values if lp.num_variables else 0
    return FeasibilityReport(
        feasible=not violations, objective=objective, violations=violations, tight_rows=tight
    )


def format_lp(lp: LinearProgram) -> str:
    """Plain text listing of a program for debugging with other tools

    The format is line based and documented in notes.md:
        SENSE max|min
        VARIABLES <n>
        OBJ <col> <value>               one line per nonzero objective coefficient
        ROW <row> <kind> <rhs> <label>  one line per row
        COEF <row> <col> <value>        one line per nonzero coefficient
        BOUND <col> <lower> <upper|inf>
        END

    Args:
        lp (LinearProgram): program to list

    Returns:
        str: the listing
    """
    lines = [f"SENSE {lp.sense}", f"VARIABLES {lp.num_variables}"]
    lines += [f"OBJ {col} {value}" for col, value in enumerate(lp.objective) if value != 0]
    for row, (kind, rhs) in enumerate(zip(lp.kinds, lp.rhs)):
        lines.append(f"ROW {row} {kind} {rhs} {lp.row_label(row)}")
    order = np.lexsort((lp.col_index, lp.row_index))
    lines += [
        f"COEF {lp.row_index[i]} {lp.col_index[i]} {lp.values[i]}"
        for i in order
        if lp.values[i] != 0
    ]
    for col in range(lp.num_variables):
        upper = lp.upper[col] if lp.has_upper[col] else "inf"
        lines.append(f"BOUND {col} {lp.lower[col]} {upper}")
    lines.append("END")
    return "\n".join(lines) + "\n"
