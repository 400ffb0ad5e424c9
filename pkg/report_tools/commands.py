"""Command line front end: argument grammar, dispatch of subcommands and report emission

Every subcommand fills one Report. Exit codes: 0 on success, 2 on usage, parse and file errors or
size limits, 3 when a solver fails or an iteration does not converge.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence, TextIO

from channel_models.channel import Channel, load_channel, tensor_power
from channel_models.errors import (
    ConverseError,
    NonConvergence,
    SolverFailure,
    UsageError,
)
from linear_programs.asymptotics import (
    capacity,
    dispersion,
    normal_approximation,
    v0_residual,
    zero_dispersion_check,
)
from linear_programs.converse import (
    QuerySpec,
    certify_size,
    load_certificate,
    max_size,
    min_error,
    save_certificate,
)
from linear_programs.hypothesis_testing import beta, ppv_bound
from linear_programs.ns_code import build_code, code_error, save_code, verify_nonsignalling
from linear_programs.reduced_converse import reduced_max_size, reduced_min_error
from linear_programs.zero_error import hypergraph, zero_error_size
from report_tools.report import Report, WarningCollector, fingerprint, round_significant
from report_tools.settings import Settings, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3


@dataclass
class Context:
    """Parsed arguments, settings and the report a subcommand fills"""

    args: argparse.Namespace
    settings: Settings
    report: Report

    @property
    def exact(self) -> bool:
        return bool(getattr(self.args, "exact", False))

    @property
    def mode(self) -> str:
        """Solver mode of explicit programs"""
        return "exact" if self.exact else "float"

    @property
    def reduced_mode(self) -> str:
        """Solver mode of joint type programs"""
        return "exact" if self.exact else "auto"

    @property
    def tol(self) -> float:
        if self.args.tol is not None:
            return float(self.args.tol)
        return self.settings.solver.feasibility_tol

    def channel(self, power: bool = True) -> Channel:
        """Channel named by --channel, raised to --power unless the reduced programs are used"""
        if self.args.channel is None:
            raise UsageError(f"{self.args.command} needs --channel FILE")
        base = load_channel(self.args.channel, exact=self.exact)
        self.report.channel = fingerprint(base)
        blocklength = getattr(self.args, "power", 1)
        if power and blocklength > 1:
            return tensor_power(base, blocklength, self.settings.limits.explicit_entries)
        return base

    def use_types(self) -> bool:
        return bool(getattr(self.args, "types", False))


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from err
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be at least 1")
    return value


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from err
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is not in [0, 1]")
    return value


def _int_list(text: str) -> list[int]:
    values = [_positive_int(item) for item in text.split(",") if item.strip()]
    if not values:
        raise argparse.ArgumentTypeError("expected a comma separated list of blocklengths")
    if values != sorted(set(values)):
        raise argparse.ArgumentTypeError("blocklengths must be strictly ascending")
    return values


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"{text!r} is not a list of numbers") from err


def _solver_stats(report: Report, mode: str, iterations: int, gap: float | None = None) -> None:
    report.solver["backend"] = mode
    report.solver["iterations"] = report.solver.get("iterations", 0) + int(iterations)
    if gap is not None:
        report.solver["gap"] = max(float(gap), float(report.solver.get("gap", 0.0)))


def cmd_error(ctx: Context) -> None:
    """Minimum NS error probability for M messages"""
    args = ctx.args
    query = QuerySpec(M=args.M)
    if ctx.use_types():
        base = ctx.channel(power=False)
        reduced = reduced_min_error(
            base,
            args.power,
            args.M,
            ctx.reduced_mode,
            ctx.settings.solver,
            ctx.settings.limits.joint_types,
        )
        ctx.report.results.update(n=args.power, M=query.M, mu=query.mu, p_err=reduced.p_err)
        ctx.report.results["joint_types"] = len(reduced.table)
        _solver_stats(ctx.report, reduced.mode, reduced.iterations)
        return
    result = min_error(ctx.channel(), args.M, ctx.mode, ctx.settings.solver)
    ctx.report.results.update(n=args.power, M=query.M, mu=query.mu, p_err=result.p_err)
    ctx.report.results["certified_p_err"] = result.dual.certified_error(args.M)
    _solver_stats(ctx.report, result.mode, result.iterations, result.gap)


def cmd_size(ctx: Context) -> None:
    """M_beta(eps) and the largest NS code size M_NS"""
    args = ctx.args
    eps = _require_eps(ctx)
    query = QuerySpec(eps=eps)
    if ctx.use_types():
        reduced = reduced_max_size(
            ctx.channel(power=False),
            args.power,
            eps,
            ctx.reduced_mode,
            ctx.settings.solver,
            ctx.settings.limits.joint_types,
        )
        ctx.report.results.update(
            n=args.power, eps=query.eps, M_beta=reduced.M_beta, M_NS=reduced.M_NS
        )
        ctx.report.results["joint_types"] = len(reduced.table)
        ctx.report.solver["pruned"] = reduced.pruned
        ctx.report.solver["dropped"] = reduced.dropped
        _solver_stats(ctx.report, reduced.mode, reduced.iterations)
        return
    result = max_size(ctx.channel(), eps, ctx.mode, ctx.settings.solver)
    ctx.report.results.update(n=args.power, eps=query.eps, M_beta=result.M_beta, M_NS=result.M_NS)
    ctx.report.results["certified_bound"] = result.dual.certified_bound
    if args.save_cert:
        save_certificate(result.dual, args.save_cert)
        logger.info("certificate written to %s", args.save_cert)
    _solver_stats(ctx.report, result.mode, result.iterations, result.gap)


def cmd_zero_error(ctx: Context) -> None:
    """Fractional packing number alpha* of the channel hypergraph and M0 = floor(alpha*)"""
    channel = ctx.channel()
    result = zero_error_size(channel, ctx.mode, ctx.settings.solver)
    ctx.report.results.update(alpha_star=result.alpha_star, M0=result.M0)
    if channel.input_size * channel.output_size <= 4096:
        ctx.report.results["edges"] = hypergraph(channel).edge_list()
    ctx.report.results["vertex_weights"] = result.packing.weights
    _solver_stats(ctx.report, ctx.mode, result.packing.iterations)


def cmd_capacity(ctx: Context) -> None:
    """Capacity in bits by Blahut-Arimoto"""
    result = capacity(ctx.channel(), ctx.args.tol, ctx.settings.asymptotics)
    ctx.report.results.update(C=result.C, p_star=result.p_star, q_star=result.q_star)
    ctx.report.solver.update(iterations=result.iterations, residual=result.residual)


def cmd_dispersion(ctx: Context) -> None:
    """Dispersion in bits^2 over the capacity achieving inputs"""
    channel = ctx.channel()
    result = dispersion(channel, ctx.args.tol, ctx.settings.asymptotics, solver=ctx.settings.solver)
    ctx.report.results.update(
        V=result.V,
        C=result.capacity.C,
        p_min=result.p_min,
        support=list(result.support_set),
        v0_residual=v0_residual(channel, result),
    )
    ctx.report.solver["iterations"] = result.capacity.iterations


def cmd_asymptotics(ctx: Context) -> None:
    """C, V, K0, log2 alpha* and the three zero dispersion flags"""
    channel = ctx.channel()
    tol = ctx.args.tol if ctx.args.tol is not None else 1e-6
    flags = zero_dispersion_check(channel, tol, ctx.settings.asymptotics, ctx.settings.solver)
    ctx.report.results.update(
        C=flags.capacity,
        V=flags.V,
        K0=flags.K0,
        log2_alpha_star=flags.log_alpha_star,
        cond_capacity_eq_alpha=flags.cond_capacity_eq_alpha,
        cond_K0_eq_C=flags.cond_K0_eq_C,
        cond_V_zero=flags.cond_V_zero,
        consistent=flags.consistent,
    )
    if ctx.args.eps is not None and ctx.args.n is not None:
        ctx.report.results["normal_approx"] = normal_approximation(
            flags.capacity, flags.V, ctx.args.n, ctx.args.eps
        )
    ctx.report.tolerance = tol


def _sweep_row(
    ctx: Context, base: Channel, eps: float, n: int, C: float, V: float
) -> dict[str, Any]:
    if ctx.use_types():
        result: Any = reduced_max_size(
            base, n, eps, ctx.reduced_mode, ctx.settings.solver, ctx.settings.limits.joint_types
        )
    else:
        power = tensor_power(base, n, ctx.settings.limits.explicit_entries)
        result = max_size(power, eps, ctx.mode, ctx.settings.solver)
    log_size = math.log2(float(result.M_beta))
    approx = normal_approximation(C, V, n, eps)
    digits = ctx.settings.report.significant_digits
    return {
        "n": n,
        "log2_M_beta": round_significant(log_size, digits),
        "rate": round_significant(log_size / n, digits),
        "normal_approx": round_significant(approx, digits),
        "gap": round_significant(log_size - approx, digits),
    }


def sweep(
    ctx: Context, base: Channel, eps: float, n_list: Sequence[int]
) -> list[dict[str, Any]]:
    """One row per blocklength, in n order whatever order the workers finish in

    Raises:
        LimitExceeded: an explicit tensor power is too large, the joint type programs are needed
    """
    if list(n_list) != sorted(set(n_list)) or n_list[0] < 1:
        raise UsageError("blocklengths must be positive and strictly ascending")
    spread = dispersion(base, options=ctx.settings.asymptotics, solver=ctx.settings.solver)
    C, V = spread.capacity.C, spread.V
    workers = max(1, ctx.settings.report.workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda n: _sweep_row(ctx, base, eps, n, C, V), n_list))


def cmd_sweep(ctx: Context) -> None:
    """log2 M_beta against the normal approximation over several blocklengths"""
    eps = _require_eps(ctx)
    if not 0.0 < eps < 1.0:
        raise UsageError(f"sweep needs 0 < eps < 1 for the normal approximation, got {eps}")
    if ctx.args.n_list is None:
        raise UsageError("sweep needs --n-list")
    base = ctx.channel(power=False)
    ctx.report.rows = sweep(ctx, base, eps, ctx.args.n_list)
    ctx.report.results.update(eps=eps, rows=len(ctx.report.rows))
    ctx.report.solver["backend"] = ctx.reduced_mode if ctx.use_types() else ctx.mode


def cmd_certify(ctx: Context) -> None:
    """Check a size certificate and report the bound it proves"""
    if ctx.args.cert is None:
        raise UsageError("certify needs --cert FILE")
    eps = _require_eps(ctx)
    channel = ctx.channel()
    certificate = load_certificate(ctx.args.cert)
    checked = certify_size(channel, eps, certificate, ctx.tol, exact=ctx.exact)
    ctx.report.results.update(valid=checked.valid, bound=checked.bound)
    ctx.report.results["violations"] = list(checked.violations)
    ctx.report.tolerance = 0.0 if ctx.exact else ctx.tol


def cmd_code(ctx: Context) -> None:
    """Build the optimal NS code for M messages and verify it"""
    args = ctx.args
    channel = ctx.channel()
    result = min_error(channel, args.M, ctx.mode, ctx.settings.solver)
    code = build_code(channel, args.M, result.primal)
    tol = ctx.args.tol if ctx.args.tol is not None else 1e-10
    checks = verify_nonsignalling(code, tol, channel)
    ctx.report.results.update(
        M=args.M,
        p_err_lp=result.p_err,
        p_err_code=code_error(code, channel),
        nsa_to_b=checks.nsa_to_b,
        nsb_to_a=checks.nsb_to_a,
        normalization=checks.normalization,
        passed=checks.passed,
    )
    ctx.report.tolerance = tol
    if args.save_code:
        save_code(code, args.save_code)
        logger.info("code written to %s", args.save_code)
    _solver_stats(ctx.report, result.mode, result.iterations, result.gap)


def cmd_beta(ctx: Context) -> None:
    """Neyman-Pearson beta of two distributions, or the hypothesis testing converse of a channel"""
    args = ctx.args
    eps = _require_eps(ctx)
    if args.p0 is not None or args.p1 is not None:
        if args.p0 is None or args.p1 is None:
            raise UsageError("beta needs both --p0 and --p1")
        result = beta(args.p0, args.p1, eps)
        ctx.report.results.update(beta=result.beta, test=result.test.T)
        return
    converse = ppv_bound(ctx.channel(), eps, ctx.mode, ctx.settings.solver)
    ctx.report.results.update(M_ppv=converse.M_ppv, mu=converse.mu, p=converse.p)


def _require_eps(ctx: Context) -> float:
    if ctx.args.eps is None:
        raise UsageError(f"{ctx.args.command} needs --eps")
    return float(ctx.args.eps)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--channel", metavar="FILE", help="channel JSON file")
    common.add_argument("--power", type=_positive_int, default=1, metavar="N", help="blocklength")
    common.add_argument("--types", action="store_true", help="use the joint type programs")
    common.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--tol", type=float, metavar="REAL", help="tolerance")
    common.add_argument("--out", metavar="FILE", help="write the report here instead of stdout")
    common.add_argument("--config", metavar="FILE", help="settings JSON file")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return common


COMMANDS: dict[str, tuple[Callable[[Context], None], str]] = {
    "error": (cmd_error, "minimum NS error probability for M messages"),
    "size": (cmd_size, "largest NS code size for error eps"),
    "zero-error": (cmd_zero_error, "fractional packing number and zero-error code size"),
    "capacity": (cmd_capacity, "capacity in bits"),
    "dispersion": (cmd_dispersion, "dispersion in bits^2"),
    "asymptotics": (cmd_asymptotics, "capacity, dispersion, K0 and zero dispersion flags"),
    "sweep": (cmd_sweep, "log2 M_beta over several blocklengths"),
    "certify": (cmd_certify, "check a size certificate"),
    "code": (cmd_code, "build and verify an optimal NS code"),
    "beta": (cmd_beta, "Neyman-Pearson beta or the hypothesis testing converse"),
}


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per entry of COMMANDS"""
    parser = argparse.ArgumentParser(
        prog="nsbounds", description="Finite blocklength converse bounds for discrete channels"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    for name, (handler, summary) in COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=summary, description=summary)
        sub.set_defaults(handler=handler)
        if name in ("error", "code"):
            sub.add_argument("-M", type=_positive_int, required=True, help="number of messages")
        if name in ("size", "sweep", "certify", "beta", "asymptotics"):
            sub.add_argument("--eps", type=_probability, metavar="REAL", help="allowed error")
        if name == "size":
            sub.add_argument("--save-cert", metavar="FILE", help="write the dual certificate")
        if name == "code":
            sub.add_argument("--save-code", metavar="FILE", help="write the code as JSON")
        if name == "sweep":
            sub.add_argument("--n-list", type=_int_list, metavar="N,N,...", help="blocklengths")
        if name == "certify":
            sub.add_argument("--cert", metavar="FILE", help="certificate JSON file")
        if name == "asymptotics":
            sub.add_argument("-n", type=_positive_int, help="blocklength of the approximation")
        if name == "beta":
            sub.add_argument("--p0", type=_float_list, metavar="P,P,...", help="null hypothesis")
            sub.add_argument("--p1", type=_float_list, metavar="P,P,...", help="alternative")
    return parser


def _exit_code(err: BaseException) -> int:
    if isinstance(err, (SolverFailure, NonConvergence)):
        return EXIT_SOLVER
    return EXIT_USAGE


def execute(args: argparse.Namespace, settings: Settings, argv: Sequence[str]) -> Report:
    """Run the parsed subcommand and return its report, WARNING records end up in its warnings

    Raises:
        ConverseError: any failure of the subcommand
        OSError: unreadable input files
    """
    report = Report(
        command=list(argv),
        mode="exact" if args.exact else "float",
        tolerance=args.tol if args.tol is not None else settings.solver.feasibility_tol,
    )
    collector = WarningCollector()
    root = logging.getLogger()
    root.addHandler(collector)
    started = time.perf_counter()
    try:
        args.handler(Context(args=args, settings=settings, report=report))
    finally:
        root.removeHandler(collector)
        report.timing = time.perf_counter() - started
    report.warnings.extend(dict.fromkeys(collector.messages))
    return report


def run(argv: Sequence[str], stdout: TextIO | None = None) -> tuple[int, Report | None]:
    """Run one command line and emit its report

    Example:
        ```
        code, report = run(["size", "--channel", "sample_channels/useless.json", "--eps", "0.75"])
        report.results["M_beta"]  # 4.0
        ```

    Args:
        argv (Sequence[str]): arguments without the program name
        stdout (TextIO, optional): where reports go when --out is not given. Defaults to sys.stdout.

    Returns:
        tuple[int, Report | None]: exit code and the report, None when the command failed
    """
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(list(argv))
    except SystemExit as err:
        return (EXIT_USAGE if err.code else EXIT_OK), None
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        settings = load_config(args.config)
        report = execute(args, settings, argv)
    except (ConverseError, OSError) as err:
        code = _exit_code(err)
        kind = "solver failure" if code == EXIT_SOLVER else "error"
        print(f"nsbounds: {kind}: {err}", file=sys.stderr)
        return code, None

    text = report.render(args.format, settings.report.significant_digits)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as out_file:
            out_file.write(text)
    else:
        stdout.write(text)
    return EXIT_OK, report
