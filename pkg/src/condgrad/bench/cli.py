"""Benchmark command line: list experiments, run them, replot CSV traces.

Exit codes: 0 on success, 1 on configuration errors (unknown names, bad
flags, unwritable output), 2 on runtime/solver errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from ..core import ConfigurationError, load_trace_rows
from .experiments import list_experiments, make_spec, run_experiment
from .svgplot import LinePlot

CONFIG_KEYS = ("seed", "iters", "tol", "ksc", "lazy-j", "step", "out", "data")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def parse_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{path}:{lineno}: expected 'key = value'"
            )
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_parser() -> _Parser:
    parser = _Parser(prog="bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="show the experiment registry")

    run = sub.add_parser("run", help="run a named experiment")
    run.add_argument("name")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--iters", type=int, default=None)
    run.add_argument("--tol", type=float, default=None)
    run.add_argument("--ksc", type=float, default=None)
    run.add_argument("--lazy-j", type=float, default=None, dest="lazy_j")
    run.add_argument(
        "--step", choices=["linesearch", "shortstep", "adaptive"], default=None
    )
    run.add_argument("--config", default=None, help="key = value config file")
    run.add_argument("--data", default=None, help="ratings CSV for completion runs")

    plot = sub.add_parser("plot", help="render SVG plots from trace CSVs")
    plot.add_argument("csvs", nargs="+")
    plot.add_argument("--out", default=".")
    return parser


def _merged_options(args) -> dict:
    """File values under CLI flags: flags win whenever both are present."""
    opts = {
        "seed": args.seed,
        "iters": args.iters,
        "tol": args.tol,
        "ksc": args.ksc,
        "lazy-j": args.lazy_j,
        "step": args.step,
        "out": args.out,
        "data": args.data,
    }
    if args.config:
        file_vals = parse_config_file(args.config)
        casts = {
            "seed": int,
            "iters": int,
            "tol": float,
            "ksc": float,
            "lazy-j": float,
            "step": str,
            "out": str,
            "data": str,
        }
        for key, raw in file_vals.items():
            if opts.get(key) is None:
                try:
                    opts[key] = casts[key](raw)
                except ValueError as exc:
                    raise ConfigurationError(
                        f"bad value for {key!r} in {args.config}: {exc}"
                    ) from exc
    return opts


def _cmd_list() -> int:
    for name, summary in list_experiments():
        print(f"{name:32s} {summary}")
    return 0


def _cmd_run(args) -> int:
    opts = _merged_options(args)
    spec = make_spec(
        args.name,
        seed=opts["seed"],
        iters=opts["iters"],
        tol=opts["tol"],
        k_sc=opts["ksc"],
        lazy_accuracy=opts["lazy-j"],
        step=opts["step"],
        output_dir=opts["out"] if opts["out"] is not None else "bench-out",
        data=opts["data"],
    )
    result = run_experiment(spec)
    for path in result.csv_paths + result.svg_paths:
        print(path)
    return 0


def _cmd_plot(args) -> int:
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"output directory not writable: {exc}") from exc
    conv = LinePlot(
        title="primal (solid) and FW gap (dashed)",
        xlabel="iteration",
        ylabel="value",
        ylog=True,
    )
    spars = LinePlot(
        title="support size against primal value",
        xlabel="primal",
        ylabel="support size",
        xlog=True,
    )
    timed = LinePlot(
        title="primal against time",
        xlabel="seconds",
        ylabel="primal",
        ylog=True,
    )
    have_timing = False
    for path in args.csvs:
        rows = load_trace_rows(path)
        stem = os.path.splitext(os.path.basename(path))[0]
        iters = [row["iteration"] + 1 for row in rows]
        primal = [row["primal"] for row in rows]
        conv.add_series(stem, iters, primal)
        conv.add_series(
            f"{stem} (dual)", iters, [row["fw_gap"] for row in rows], dashed=True
        )
        spars.add_series(stem, primal, [row["support_size"] for row in rows])
        times = [row["elapsed_ns"] for row in rows]
        if any(t is not None for t in times):
            have_timing = True
            timed.add_series(
                stem,
                [t * 1e-9 for t in times if t is not None],
                [p for p, t in zip(primal, times) if t is not None],
            )
    outputs = [
        (os.path.join(args.out, "plot_convergence.svg"), conv),
        (os.path.join(args.out, "plot_sparsity.svg"), spars),
    ]
    if have_timing:
        outputs.append((os.path.join(args.out, "plot_time.svg"), timed))
    for path, plot in outputs:
        plot.write(path)
        print(path)
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "list":
            return _cmd_list()
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "plot":
            return _cmd_plot(args)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except ConfigurationError as exc:
        print(f"bench: configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime/solver failures
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
