"""Command line front end.

Subcommands:
  run       simulate a config, write the record log, print a summary
  validate  parse and check a config, print one line about it
  serve     host the websocket cockpit service

Exit codes: 0 success, 1 configuration or usage error, 2 simulation
failure (non-finite state, or a scripted contact run that never touched
the wall). OMNITELEOP_LOG_DIR sets the default log directory;
OMNITELEOP_BIND sets the default serve address as host:port.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import DecouplingSpec, PushSlideSpec, load_config
from .engine import BACKEND
from .errors import ConfigError, NoContact, NonFiniteState
from .experiments import emit_plot_data, run_decoupling, run_push_slide
from .orchestrator import load_replay, resolve_log_path, run
from .records import write_log


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omniteleop",
        description="Deterministic bilateral teleoperation simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a config and write the log")
    p_run.add_argument("--config", required=True, help="YAML run configuration")
    src = p_run.add_mutually_exclusive_group()
    src.add_argument("--trace", help="timed operator wrench trace (JSONL)")
    src.add_argument("--replay", help="recorded per-tick input file (JSONL)")
    p_run.add_argument("--out", help="record log path (default: log dir + run.jsonl)")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--duration", type=float, help="override the run length [s]")
    p_run.add_argument("--decimation", type=int, help="override the log decimation")
    p_run.add_argument("--plot-data", help="columnar plot file (experiment runs only)")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("--config", required=True, help="YAML run configuration")
    p_val.set_defaults(func=cmd_validate)

    p_srv = sub.add_parser("serve", help="host the websocket cockpit service")
    p_srv.add_argument("--config", required=True, help="YAML run configuration")
    p_srv.add_argument(
        "--bind", default="127.0.0.1:8765",
        help="addr:port to listen on (OMNITELEOP_BIND overrides)",
    )
    p_srv.set_defaults(func=cmd_serve)
    return parser


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:+.6f}" for x in v) + "]"


def _print_summary(summary: dict, log_path: str | None) -> None:
    print(
        f"ticks: {summary['ticks']}  records: {summary['records']}"
        f"  duration: {summary['duration']:.3f} s  backend: {BACKEND}"
    )
    print(f"final station p:   {_fmt_vec(summary['final_station_p'])}")
    print(f"final reference p: {_fmt_vec(summary['final_reference_p'])}")
    print(
        f"final vehicle p:   {_fmt_vec(summary['final_vehicle_p'])}"
        f"  q: {_fmt_vec(summary['final_vehicle_q'])}"
    )
    print(f"max contact force: {summary['max_contact_force']:.4f} N")
    if log_path:
        print(f"log: {log_path}")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.out is not None:
        log_path = args.out
    elif cfg.log:
        log_path = cfg.log
    else:
        log_path = resolve_log_path(None)
    cfg = cfg.with_overrides(
        seed=args.seed,
        duration=args.duration,
        decimation=args.decimation,
        trace=args.trace,
        log=log_path,
    )
    os.makedirs(os.path.dirname(log_path) or ".", exist_ok=True)

    if cfg.experiment is not None and (args.trace or args.replay):
        print("error: experiment runs script their own input; drop --trace/--replay",
              file=sys.stderr)
        return 1

    if isinstance(cfg.experiment, DecouplingSpec):
        report, rep_rows = run_decoupling(cfg)
        write_log(log_path, np.vstack(rep_rows))
        if args.plot_data:
            emit_plot_data(rep_rows[0], args.plot_data, "decoupling")
        print(f"decoupling: {report.repetitions} repetitions, "
              f"tremor {report.tremor_amplitude:g}, backend: {BACKEND}")
        print("coupling ratios (max off-axis peak / on-axis peak):")
        for ax in report.axes:
            print(f"  {ax.axis}: on {ax.on_axis_peak_mean:.4f}"
                  f"  ratio {ax.ratio_mean:.3e} +/- {ax.ratio_std:.3e}")
        print(f"worst ratio: {report.worst_ratio():.3e}")
        print(f"log: {log_path}")
        return 0

    if isinstance(cfg.experiment, PushSlideSpec):
        report, rows = run_push_slide(cfg)
        write_log(log_path, rows)
        if args.plot_data:
            emit_plot_data(rows, args.plot_data, "push_slide")
        print(f"push-slide: contact onset {report.contact_onset:.3f} s, backend: {BACKEND}")
        print(f"push force: {report.push_force_mean:.3f} +/- {report.push_force_std:.3f} N")
        print(f"slide torque up/down: {report.slide_up_torque_mean:+.3f} /"
              f" {report.slide_down_torque_mean:+.3f} N*m")
        print(f"peak misalignment: {float(report.alpha[:, 1].max()):.4f} rad")
        print(f"log: {log_path}")
        return 0

    if args.plot_data:
        print("error: --plot-data needs a config with an experiment block", file=sys.stderr)
        return 1
    modes = cmds = None
    if args.replay is not None:
        modes, cmds = load_replay(args.replay, cfg.ticks())
    result = run(cfg, modes, cmds)
    _print_summary(result.summary, result.log_path)
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    if isinstance(cfg.experiment, DecouplingSpec):
        kind = "decoupling"
    elif isinstance(cfg.experiment, PushSlideSpec):
        kind = "push_slide"
    else:
        kind = "none"
    print(
        f"ok: dt={cfg.dt:g} duration={cfg.duration:g} ticks={cfg.ticks()}"
        f" wall={'yes' if cfg.wall else 'no'} experiment={kind}"
    )
    return 0


def parse_bind(bind: str) -> tuple[str, int]:
    """Split addr:port, tolerating a bare port."""
    host, _, port = bind.rpartition(":")
    if not port:
        raise ConfigError("bind", "expected addr:port")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise ConfigError("bind", "port must be an integer") from None


def cmd_serve(args) -> int:
    cfg = load_config(args.config)
    host, port = parse_bind(os.environ.get("OMNITELEOP_BIND") or args.bind)
    from .service import serve

    serve(cfg, host=host, port=port)
    return 0


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        # --help exits 0; remap argparse usage errors onto exit code 1
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (NonFiniteState, NoContact) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
