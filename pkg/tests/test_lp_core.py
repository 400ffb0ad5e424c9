from fractions import Fraction

import numpy as np
import pytest

from channel_models.errors import DimensionMismatch, IterationLimit
from linear_programs.lp_core import (
    ProgramBuilder,
    SolverOptions,
    check_point,
    choose_mode,
    format_lp,
    solve_lp,
)


def production_program(exact: bool = False):
    """max 3x + 2y s.t. x + y <= 4, x + 3y <= 9, 0 <= x <= 3, y >= 0, optimum x=3, y=1"""
    builder = ProgramBuilder("max", exact=exact)
    x = builder.add_variables("x", 1, objective=3, upper=3)
    y = builder.add_variables("y", 1, objective=2)
    builder.add_row("total", [x[0], y[0]], [1, 1], "<=", 4)
    builder.add_row("labour", [x[0], y[0]], [1, 3], "<=", 9)
    return builder.build()


def diet_program(exact: bool = False):
    """min 2x + 3y s.t. x + y >= 2, x - y = 0, optimum x = y = 1"""
    builder = ProgramBuilder("min", exact=exact)
    cols = builder.add_variables("xy", 2, objective=[2, 3])
    builder.add_row("demand", cols, [1, 1], ">=", 2)
    builder.add_row("balance", cols, [1, -1], "=", 0)
    return builder.build()


@pytest.mark.parametrize("mode", ["float", "exact", "highs"])
def test_max_program_primal_and_duals(mode):
    solution = solve_lp(production_program(), mode)
    assert solution.optimal
    assert float(solution.objective) == pytest.approx(11.0)
    assert float(solution.variables("x")[0]) == pytest.approx(3.0)
    assert float(solution.variables("y")[0]) == pytest.approx(1.0)
    assert float(solution.row_duals("total")[0]) == pytest.approx(2.0)
    assert float(solution.row_duals("labour")[0]) == pytest.approx(0.0, abs=1e-9)
    assert float(solution.bound_duals[0]) == pytest.approx(1.0)
    assert solution.gap == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("mode", ["float", "exact", "highs"])
def test_min_program_duals_are_shadow_prices(mode):
    solution = solve_lp(diet_program(), mode)
    assert float(solution.objective) == pytest.approx(5.0)
    assert float(solution.row_duals("demand")[0]) == pytest.approx(2.5)
    assert float(solution.row_duals("balance")[0]) == pytest.approx(-0.5)


def test_exact_mode_returns_fractions():
    solution = solve_lp(production_program(exact=True), "exact")
    assert solution.objective == Fraction(11)
    assert solution.gap == 0
    assert all(isinstance(value, Fraction) for value in solution.primal)


def test_infeasible():
    builder = ProgramBuilder("max")
    x = builder.add_variables("x", 1, objective=1)
    builder.add_row("cap", x, 1, "<=", 1)
    builder.add_row("floor", x, 1, ">=", 2)
    assert solve_lp(builder.build()).status == "infeasible"
    assert solve_lp(builder.build(), "highs").status == "infeasible"


def test_unbounded():
    builder = ProgramBuilder("max")
    cols = builder.add_variables("x", 2, objective=[1, 0])
    builder.add_row("spread", cols, [1, -1], "<=", 1)
    assert solve_lp(builder.build()).status == "unbounded"


def test_lower_bounds_are_shifted():
    builder = ProgramBuilder("min")
    cols = builder.add_variables("x", 2, objective=1, lower=[2, 0])
    builder.add_row("sum", cols, [1, 1], ">=", 3)
    solution = solve_lp(builder.build())
    assert float(solution.objective) == pytest.approx(3.0)
    assert float(solution.primal[0]) >= 2.0 - 1e-12


def test_degenerate_cycling_example_terminates():
    # classic example on which Dantzig pricing cycles without an anti-cycling rule
    builder = ProgramBuilder("max")
    cols = builder.add_variables("x", 4, objective=[0.75, -20, 0.5, -6])
    builder.add_row("first", cols, [0.25, -8, -1, 9], "<=", 0)
    builder.add_row("second", cols, [0.5, -12, -0.5, 3], "<=", 0)
    builder.add_row("third", cols[2:3], [1], "<=", 1)
    for mode in ("float", "exact"):
        solution = solve_lp(builder.build(), mode, SolverOptions(stall_threshold=3))
        assert float(solution.objective) == pytest.approx(1.25)


def test_iteration_limit():
    with pytest.raises(IterationLimit):
        solve_lp(production_program(), "float", SolverOptions(iteration_limit=0))


@pytest.mark.parametrize("seed", range(10))
def test_random_programs_agree_across_backends(seed):
    rng = np.random.default_rng(seed)
    rows, cols = int(rng.integers(2, 7)), int(rng.integers(2, 7))
    matrix = rng.random((rows, cols)) + 0.05
    builder = ProgramBuilder("max")
    variables = builder.add_variables("x", cols, objective=rng.random(cols))
    builder.add_rows(
        "cap",
        rows,
        np.repeat(np.arange(rows), cols),
        np.tile(variables, rows),
        matrix.reshape(-1),
        "<=",
        rng.random(rows) + 0.5,
    )
    program = builder.build()
    dense = solve_lp(program, "float")
    highs = solve_lp(program, "highs")
    exact = solve_lp(program, "exact")
    assert dense.gap <= 1e-8
    assert float(dense.objective) == pytest.approx(float(highs.objective), rel=1e-8)
    assert float(exact.objective) == pytest.approx(float(dense.objective), rel=1e-9)
    assert exact.objective == exact.dual_objective


def test_choose_mode_switches_to_highs():
    program = production_program()
    assert choose_mode(program) == "float"
    assert choose_mode(program, SolverOptions(dense_cell_limit=4)) == "highs"
    auto = solve_lp(program, "auto", SolverOptions(dense_cell_limit=4))
    assert auto.mode == "highs"
    assert float(auto.objective) == pytest.approx(11.0)


def test_check_point_lists_violations():
    program = production_program()
    report = check_point(program, [4.0, 1.0])
    assert not report.feasible
    kinds = {(violation.kind, violation.label) for violation in report.violations}
    assert ("row", "total") in kinds
    assert ("upper", "x[0]") in kinds
    assert report.objective == pytest.approx(14.0)

    optimum = check_point(program, [3.0, 1.0])
    assert optimum.feasible
    assert optimum.tight_rows == [0]


def test_check_point_width():
    with pytest.raises(DimensionMismatch):
        check_point(production_program(), [1.0])


def test_format_lp_listing():
    text = format_lp(production_program())
    lines = text.splitlines()
    assert lines[0] == "SENSE max"
    assert lines[1] == "VARIABLES 2"
    assert "ROW 0 <= 4.0 total" in lines
    assert "BOUND 0 0.0 3.0" in lines
    assert "BOUND 1 0.0 inf" in lines
    assert lines[-1] == "END"


def test_builder_rejects_duplicates_and_bad_shapes():
    builder = ProgramBuilder("min")
    builder.add_variables("x", 2)
    with pytest.raises(ValueError):
        builder.add_variables("x", 1)
    with pytest.raises(DimensionMismatch):
        builder.add_variables("y", 2, objective=[1, 2, 3])
    with pytest.raises(DimensionMismatch):
        builder.add_rows("r", 1, [0, 1], [0, 1], 1, "<=", 1)
