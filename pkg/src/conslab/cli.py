"""Command line front end.

Exit codes: 0 when every evaluated hard assertion passed, 1 when a run or
assertion failed, 2 for configuration problems.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dynamics import SimConfig
from .harness import (
    ConfigError,
    SweepConfig,
    emit_fp_bounds,
    emit_layer_outputs,
    emit_presscheck,
    emit_report,
    execute_run,
    parse_config,
    parse_init,
    sweep,
)


def _read_config(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return text


def _cmd_run(args) -> int:
    text = _read_config(args.config)
    cfg = parse_config(text)
    if not isinstance(cfg, SimConfig):
        raise ConfigError("config contains sweep keys; use the sweep subcommand")
    outcome = execute_run(cfg, parse_init(text), Path(args.out))
    for msg in outcome.hard_failures:
        print(f"FAIL {msg}", file=sys.stderr)
    n = len(outcome.reports)
    print(f"run: {n} reports, t_final = {outcome.traj.t[-1]:g}, "
          f"{'ok' if outcome.ok else 'FAILED'}")
    return 0 if outcome.ok else 1


def _cmd_sweep(args) -> int:
    cfg = parse_config(_read_config(args.config))
    if not isinstance(cfg, SweepConfig):
        raise ConfigError("config lacks sweep.eps_list; use the run subcommand")
    report = sweep(cfg)
    emit_report(report, Path(args.out), args.format)
    for name, passed in sorted(report.flags.items()):
        print(f"{'pass' if passed else 'FAIL'} {name}")
    return 0 if report.ok else 1


def _cmd_report(args) -> int:
    cfg = parse_config(_read_config(args.config))
    if not isinstance(cfg, SweepConfig):
        raise ConfigError("config lacks sweep.eps_list; report needs a sweep")
    written = emit_layer_outputs(cfg, Path(args.out))
    print(f"report: wrote {len(written)} files under {args.out}")
    layer_csv = written[0].read_text(encoding="utf-8")
    return 1 if "aborted" in layer_csv else 0


def _cmd_fpcheck(args) -> int:
    path, failures = emit_fp_bounds(Path(args.out))
    for msg in failures:
        print(f"FAIL {msg}", file=sys.stderr)
    print(f"fpcheck: wrote {path}, {'ok' if not failures else 'FAILED'}")
    return 0 if not failures else 1


def _cmd_presscheck(args) -> int:
    path, failures = emit_presscheck(Path(args.out), nz=args.nz)
    for msg in failures:
        print(f"FAIL {msg}", file=sys.stderr)
    print(f"presscheck: wrote {path}, {'ok' if not failures else 'FAILED'}")
    return 0 if not failures else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="conslab",
        description="slab Navier-Stokes laboratory with slip walls",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, needs_config in (
        ("run", _cmd_run, True),
        ("sweep", _cmd_sweep, True),
        ("report", _cmd_report, True),
        ("fpcheck", _cmd_fpcheck, False),
        ("presscheck", _cmd_presscheck, False),
    ):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        if name == "sweep":
            p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name == "presscheck":
            p.add_argument("--nz", type=int, default=128)
        p.set_defaults(fn=fn)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
