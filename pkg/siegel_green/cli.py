"""
Command-line front end.

Subcommands:
- bands      I_D, σ(Δ + D) and the interval decomposition with m(λ)
- green      forward / backward / diagonal Green's blocks at given sites
- dos        local density of states on an (x, eps) grid
- mc         disorder Monte Carlo of E[cd_λ²(G)]
- verify     sampled property suites
- blockdemo  Riesz projection / graph operator / block diagonalization residuals

Exit codes: 0 ok, 2 config or input error, 3 no convergence,
4 numerical invariant breach, 5 property failure.
"""

import argparse
import logging
import math
import os
import sys
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .blockdecomp import (
    block_diagonalize,
    denisov_split,
    graph_operators,
    graph_projector,
    projection_deviation,
    riesz_projection,
)
from .common import emit, render_csv, render_json, setup_logging
from .disorder_mc import CSV_HEADER, run
from .errors import ConfigError, PropertyViolation, SiegelGreenError
from .green import GreenKind, backward_green, diagonal_green, dos_curve, forward_green
from .matcore import RealSym, op_norm
from .model import band_report
from .schemas import (
    BandIntervalModel,
    BandsReportModel,
    MCPointModel,
    MCReportModel,
    OutputFormat,
    PropertyStatModel,
    RunConfig,
    VerifyReportModel,
    dump_config,
    grid_values,
    load_config,
)
from .siegel import SpectralParameter
from .verify import SUITES, run_suite

logger = logging.getLogger("siegel_green.cli")

GREEN_FUNCS = {
    GreenKind.FORWARD: forward_green,
    GreenKind.BACKWARD: backward_green,
    GreenKind.DIAGONAL: diagonal_green,
}


def _opt(x: float) -> Optional[float]:
    return None if math.isnan(x) else x


def _output_path(config: RunConfig, args: argparse.Namespace) -> Optional[str]:
    return args.output if args.output is not None else config.output.path


def _jobs(args: argparse.Namespace) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get("SIEGEL_GREEN_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SIEGEL_GREEN_JOBS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_bands(config: RunConfig, args: argparse.Namespace) -> int:
    report = band_report(config.operator.to_spec())
    if config.output.format is OutputFormat.JSON:
        model = BandsReportModel(
            I_D=report.I_D,
            sigma_free=list(report.sigma_free),
            breakpoints=list(report.breakpoints),
            intervals=[BandIntervalModel(interval=(iv.lo, iv.hi), count=iv.count, channels=list(iv.channels))
                       for iv in report.intervals],
        )
        emit(model.model_dump_json(indent=2) + "\n", _output_path(config, args))
        return 0
    lines = [report.summary_line()]
    for iv in report.intervals:
        chans = ",".join(str(k) for k in iv.channels)
        lines.append(f"  [{iv.lo:.6f}, {iv.hi:.6f}]: m = {iv.count}; channels = {chans}")
    emit("\n".join(lines) + "\n", _output_path(config, args))
    return 0


def cmd_green(config: RunConfig, args: argparse.Namespace) -> int:
    spec = config.operator.to_spec()
    q = config.disorder.sample(spec.m)
    cfg = config.engine.to_engine()
    g = config.green
    lam = SpectralParameter(g.x, g.eps)
    results = [GREEN_FUNCS[kind](spec, q, lam, n, cfg) for n in g.sites for kind in g.kinds]

    if config.output.format is OutputFormat.JSON:
        payload = [
            {
                "n": r.site,
                "kind": r.kind.value,
                "value": r.value.value,
                "depth_used": r.depth_used,
                "residual": r.residual,
                "gamma_hat": r.gamma_hat,
                "error_estimate": r.error_estimate,
            }
            for r in results
        ]
        emit(render_json({"lambda": lam.lam, "results": payload}), _output_path(config, args))
        return 0
    m = spec.m
    header = ["n", "kind"]
    for i in range(m):
        for j in range(m):
            header += [f"re_{i}{j}", f"im_{i}{j}"]
    rows = []
    for r in results:
        row = [r.site, r.kind.value]
        for z in r.value.value.reshape(-1):
            row += [float(z.real), float(z.imag)]
        rows.append(row)
    emit(render_csv(header, rows), _output_path(config, args))
    return 0


def cmd_dos(config: RunConfig, args: argparse.Namespace) -> int:
    spec = config.operator.to_spec()
    q = config.disorder.sample(spec.m)
    rows = dos_curve(spec, q, grid_values(config.dos.x_grid), config.dos.eps_list,
                     config.dos.site, config.engine.to_engine())
    if config.output.format is OutputFormat.JSON:
        emit(render_json([{"x": r.x, "eps": r.eps, "dos": r.dos} for r in rows]), _output_path(config, args))
    else:
        emit(render_csv(("x", "eps", "dos"), [(r.x, r.eps, r.dos) for r in rows]), _output_path(config, args))
    return 0


def cmd_mc(config: RunConfig, args: argparse.Namespace) -> int:
    spec = config.operator.to_spec()
    exp = config.experiment_for(spec)
    report = run(exp, jobs=_jobs(args), C0=config.experiment.C0)
    if config.output.format is OutputFormat.JSON:
        model = MCReportModel(
            config=config.model_dump(mode="json"),
            results=[MCPointModel(x=p.x, eps=p.eps, mean=_opt(p.mean), var=_opt(p.var), max=_opt(p.max),
                                  trials=p.trials, failures=p.failures) for p in report.points],
            trials_requested=report.trials_requested,
            failures=report.failures,
            failed_trials=list(report.failed_trials),
            flagged=report.flagged,
            product_bound=report.product_bound,
            exp_bound=report.exp_bound,
            c0=report.c0,
            sum_second_moments=report.sum_second_moments,
        )
        emit(model.model_dump_json(indent=2) + "\n", _output_path(config, args))
    else:
        emit(render_csv(CSV_HEADER, report.csv_rows()), _output_path(config, args))
    return 0


def _parse_delta(raw: Optional[str]) -> Optional[RealSym]:
    if raw is None:
        return None
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"--delta is not a YAML matrix: {exc}") from exc
    try:
        arr = np.atleast_2d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--delta is not a numeric matrix: {value!r}") from exc
    return RealSym(arr)


def cmd_verify(config: RunConfig, args: argparse.Namespace) -> int:
    delta = _parse_delta(args.delta)
    reports = run_suite(args.suite, args.samples, args.seed, delta)
    if config.output.format is OutputFormat.JSON:
        payload = [
            VerifyReportModel(
                suite=r.suite, seed=r.seed, samples=r.samples,
                properties=[PropertyStatModel(name=s.name, samples=s.samples, passed=s.passed,
                                              worst_margin=s.worst_margin) for s in r.properties.values()],
            ).model_dump(mode="json")
            for r in reports
        ]
        emit(render_json(payload), _output_path(config, args))
    else:
        emit("\n".join(line for r in reports for line in r.lines()) + "\n", _output_path(config, args))
    return 0


def cmd_blockdemo(config: RunConfig, args: argparse.Namespace) -> int:
    demo = config.blockdemo
    B = demo.to_block()
    table: dict = {}
    if demo.denisov is not None:
        B = denisov_split(B, demo.denisov.a, demo.denisov.b, demo.denisov.epsilon)
        table["H1_hat"] = B.H1.entries
    H = B.HV
    P1 = riesz_projection(B, demo.contour.to_contour() if demo.contour is not None else None)
    Q1, Q2 = graph_operators(B, P1)
    bd = block_diagonalize(B, Q1, Q2)
    ev = np.linalg.eigvalsh(H)
    dev, envelope = projection_deviation(B, P1)
    table.update({
        "gap": B.gap,
        "V_norm": B.V_norm,
        "P1": P1,
        "Q1": Q1,
        "Q2": Q2,
        "A1": bd.A1,
        "A2": bd.A2,
        "T1": bd.T1,
        "T2": bd.T2,
        "eigenvalues": ev,
        "residuals": {
            "idempotent": op_norm(P1 @ P1 - P1),
            "commutator": op_norm(P1 @ H - H @ P1),
            "graph": op_norm(P1 - graph_projector(Q1)),
            "q2_plus_q1t": op_norm(Q2 + Q1.T),
            "intertwining": bd.intertwining_residual,
            "offdiag": bd.offdiag_residual,
            "eigenvalues": float(np.max(np.abs(bd.eigenvalues() - ev))),
            "projection_deviation": dev,
            "deviation_envelope": envelope,
        },
    })
    emit(render_json(table), _output_path(config, args))
    return 0


COMMANDS = {
    "bands": cmd_bands,
    "green": cmd_green,
    "dos": cmd_dos,
    "mc": cmd_mc,
    "verify": cmd_verify,
    "blockdemo": cmd_blockdemo,
}

HELP = {
    "bands": "Band edges, spectrum and channel counts of the free operator",
    "green": "Forward, backward and diagonal Green's blocks",
    "dos": "Local density of states on an (x, eps) grid",
    "mc": "Disorder Monte Carlo of E[cd_λ²(G)]",
    "verify": "Run sampled property suites",
    "blockdemo": "Riesz projection and block diagonalization residuals",
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _common_options(argument_default=None, overrides_dest: str = "overrides") -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argument_default)
    common.add_argument("--config", "-c", help="YAML configuration file")
    common.add_argument("--set", dest=overrides_dest, action="append", metavar="KEY=VALUE",
                        help="Override a config value, e.g. --set engine.tol=1e-8 (repeatable)")
    common.add_argument("--print-config", action="store_true", help="Print the effective configuration and exit")
    common.add_argument("--output", "-o", help="Output file (overrides output.path)")
    common.add_argument("--jobs", "-j", type=int, help="Worker processes (default: SIEGEL_GREEN_JOBS or all cores)")
    return common


def build_parser() -> argparse.ArgumentParser:
    # subcommands repeat the global options without defaults so values given
    # before the subcommand survive; their --set list is kept apart and appended
    sub_common = _common_options(argparse.SUPPRESS, overrides_dest="sub_overrides")
    parser = argparse.ArgumentParser(prog="siegel-green", parents=[_common_options()],
                                     description="Green's functions of random matrix-valued Schrödinger operators")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")
    for name in ("bands", "green", "dos", "mc", "blockdemo"):
        sub.add_parser(name, parents=[sub_common], help=HELP[name])
    vp = sub.add_parser("verify", parents=[sub_common], help=HELP["verify"])
    vp.add_argument("suite", choices=SUITES + ("all",))
    vp.add_argument("samples", type=int, nargs="?", default=1000)
    vp.add_argument("seed", type=int, nargs="?", default=0)
    vp.add_argument("--delta", help="Fixed δ for the lemma25 suite, as a YAML matrix")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = tuple(args.overrides or ()) + tuple(getattr(args, "sub_overrides", None) or ())
    try:
        config = load_config(args.config, overrides)
        if args.print_config:
            sys.stdout.write(dump_config(config))
            return 0
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 2
        return COMMANDS[args.command](config, args)
    except PropertyViolation as exc:
        logger.error("%s", exc)
        sys.stdout.write(render_json({"error": str(exc), "counterexample": exc.counterexample}))
        return exc.exit_code
    except SiegelGreenError as exc:
        logger.error("%s failed: %s", args.command or "siegel-green", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
