"""Command-line entry point ``thrift-bench``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import bench
from .depth import TABLE_BUDGETS, budget_table
from .exact import CapabilityError
from .formulas import MissingCoefficientsError

EXIT_OK, EXIT_CONFIG, EXIT_CAPABILITY = 0, 2, 3


def _load_config(path: str) -> bench.SweepConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise bench.ConfigError(f"cannot read config: {exc}") from None
    return bench.SweepConfig.from_json(text)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _apply_overrides(cfg: bench.SweepConfig, args) -> bench.SweepConfig:
    from dataclasses import replace

    kw = {}
    if getattr(args, "workers", None):
        kw["workers"] = args.workers
    if getattr(args, "output", None):
        kw["output"] = args.output
    if getattr(args, "pessimistic", False):
        kw["report_pessimistic"] = True
    return replace(cfg, **kw) if kw else cfg


def cmd_landscape(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    rows = bench.landscape(cfg)
    _emit(bench.landscape_csv(cfg, rows, timestamp=not args.no_timestamp), cfg.output)
    return EXIT_OK


def cmd_scaling(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    rows = bench.scaling(cfg)
    _emit(bench.scaling_csv(cfg, rows, timestamp=not args.no_timestamp), cfg.output)
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        text = Path(args.csv).read_text()
    except OSError as exc:
        raise bench.ConfigError(f"cannot read {args.csv}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    fits = bench.fit_scaling_rows(csv.DictReader(lines))
    out = ["model,formula,alpha,a,k,k_stderr,points_used,L_min,L_max"]
    for f in fits:
        out.append(",".join([f["model"], f["formula"], bench.fmt(f["alpha"]), bench.fmt(f["a"]),
                             bench.fmt(f["k"]), bench.fmt(f["k_stderr"]), str(f["points_used"]),
                             bench.fmt(f["L_min"]), bench.fmt(f["L_max"])]))
    if args.extrapolate:
        out.append("")
        out.append("model,formula,alpha,L,predicted_depth,kind")
        for f in fits:
            for L in args.extrapolate:
                kind = "interpolation" if f["L_min"] <= L <= f["L_max"] else "extrapolation"
                pred = f["a"] * L ** f["k"]
                out.append(f"{f['model']},{f['formula']},{bench.fmt(f['alpha'])},{L},{bench.fmt(pred)},{kind}")
    _emit("\n".join(out) + "\n", args.output)
    return EXIT_OK


def cmd_tables(args) -> int:
    models = [args.model] if args.model else list(TABLE_BUDGETS)
    out = ["model,formula,two_qubit,cnot,budget,steps,note"]
    for m in models:
        for r in budget_table(m, args.budget):
            out.append(",".join(str(r[k]) for k in ("model", "formula", "two_qubit", "cnot",
                                                    "budget", "steps", "note")))
    _emit("\n".join(out) + "\n", args.output)
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = _load_config(args.config)
    _emit(bench.bounds_csv(cfg, quadrature_points=args.quadrature_points), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thrift-bench", description="Product-formula benchmark sweeps.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (
        ("landscape", cmd_landscape, "best formula per (alpha, T) at a fixed depth budget"),
        ("scaling", cmd_scaling, "minimal depth reaching epsilon versus system size"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="JSON sweep configuration")
        sp.add_argument("-o", "--output", help="CSV path (defaults to the config's output or stdout)")
        sp.add_argument("-j", "--workers", type=int, help="worker processes")
        sp.add_argument("--no-timestamp", action="store_true", help="omit the creation-time comment line")
        sp.add_argument("--pessimistic", action="store_true",
                        help="append an error_pessimistic column (free-fermion sign taken as the worse one)")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("fit", help="power-law fits d = a L^k of a scaling CSV")
    sp.add_argument("csv")
    sp.add_argument("-o", "--output")
    sp.add_argument("--extrapolate", type=float, nargs="*", default=[], metavar="L")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("tables", help="depth registry and fixed-budget step counts")
    sp.add_argument("--model", choices=sorted(TABLE_BUDGETS))
    sp.add_argument("--budget", type=int)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_tables)

    sp = sub.add_parser("bounds", help="THRIFT and Magnus error bounds on a config's grid")
    sp.add_argument("config")
    sp.add_argument("-o", "--output")
    sp.add_argument("--quadrature-points", type=int, default=32)
    sp.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (bench.ConfigError, MissingCoefficientsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY


if __name__ == "__main__":
    sys.exit(main())
