"""Command-line entry point: ``resilient-mas {gains,simulate,compare,validate} <scenario>``.

Exit codes: 0 success, 1 invalid scenario (parse or validation failure),
2 runtime error.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .attacks import AttackProfile
from .errors import ParseError, ResilientMasError, ValidationError
from .reporting import (
    emit_gain_report,
    overall_verdict,
    summarize_run,
    write_error_norms_csv,
    write_summary,
    write_trace_csv,
)
from .scenario import parse_scenario
from .simulator import MODES, simulate_many, synthesize
from .topology import lemma1_report, psi_matrices
from .linalg_control import min_coupling_gain

ATTACK_CHOICES = ("both", "sensor", "actuator", "none")


def _select_attacks(config, which: str):
    prof = config.attacks
    if which == "sensor":
        prof = prof.without_actuator()
    elif which == "actuator":
        prof = prof.without_sensor()
    elif which == "none":
        prof = AttackProfile.none(config.n, config.m)
    config.attacks = prof
    return config


def _load(args):
    config = parse_scenario(args.scenario)
    if getattr(args, "dt", None) is not None:
        config.dt = args.dt
    if getattr(args, "horizon", None) is not None:
        config.T = args.horizon
    if getattr(args, "attacks", None):
        _select_attacks(config, args.attacks)
    return config


def cmd_gains(args) -> int:
    config = _load(args)
    t0 = time.perf_counter()
    gains = synthesize(config)
    sys.stdout.write(emit_gain_report(gains))
    if args.timing:
        sys.stdout.write(f"synthesis time: {time.perf_counter() - t0:.4f} s\n")
    return 0


def cmd_validate(args) -> int:
    config = _load(args)  # parse_scenario validates and raises on failure
    report = lemma1_report(psi_matrices(config.topology)[1])
    c_min = min_coupling_gain(config.leader.S, psi_matrices(config.topology)[1])
    print(f"scenario OK: {config.N} followers, {config.M} leaders, n = {config.n}")
    print(f"PsiSum: min Re(eig) = {report.min_real_eig:.6g}, "
          f"min eig of symmetric part = {report.min_sym_eig:.6g}")
    print(f"coupling gain c = {config.c:g} (minimum {c_min:.6g})")
    return 0


def _run(config, modes, jobs):
    gains_report = emit_gain_report(synthesize(config))
    traces = simulate_many([(config, m) for m in modes], max_workers=jobs)
    return gains_report, dict(zip(modes, traces))


def cmd_simulate(args) -> int:
    config = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gains_report, traces = _run(config, [args.mode], 1)
    trace = traces[args.mode]
    verdicts = trace.classify()
    write_trace_csv(trace, out / "trace.csv")
    write_error_norms_csv({args.mode: trace}, out / "error_norms.csv")
    summary = summarize_run(trace, verdicts)
    write_summary(out / "summary.txt", [summary], gains_report,
                  header=f"{args.mode}={overall_verdict(verdicts)}")
    sys.stdout.write(summary)
    return 0


def cmd_compare(args) -> int:
    config = _load(args)
    out = Path(args.out)
    gains_report, traces = _run(config, list(MODES), args.jobs)
    summaries, header = [], []
    for mode, trace in traces.items():
        (out / mode).mkdir(parents=True, exist_ok=True)
        verdicts = trace.classify()
        write_trace_csv(trace, out / mode / "trace.csv")
        summaries.append(summarize_run(trace, verdicts))
        header.append(f"{mode}={overall_verdict(verdicts)}")
    write_error_norms_csv(traces, out / "error_norms.csv")
    write_summary(out / "summary.txt", summaries, gains_report, header="\n".join(header))
    print("\n".join(header))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resilient-mas", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_arg(p):
        p.add_argument("scenario", help="scenario file (bundled: paper_sec4.scenario)")

    def run_args(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--dt", type=float, help="override the integration step")
        p.add_argument("--horizon", type=float, help="override the final time T")
        p.add_argument("--attacks", choices=ATTACK_CHOICES, default="both",
                       help="keep only some of the scenario's attacks")

    p = sub.add_parser("gains", help="synthesize and print controller gains")
    scenario_arg(p)
    p.add_argument("--timing", action="store_true", help="print synthesis wall time")
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("validate", help="check the scenario's assumptions only")
    scenario_arg(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run one closed-loop simulation and export it")
    scenario_arg(p)
    p.add_argument("--mode", choices=MODES, default="resilient")
    run_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run both controllers and summarize the verdicts")
    scenario_arg(p)
    run_args(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for the two runs")
    p.set_defaults(func=cmd_compare)
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ResilientMasError, OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
