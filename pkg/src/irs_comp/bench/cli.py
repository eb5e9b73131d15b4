"""Command line entry point: ``python -m irs_comp <command> ...``."""

from __future__ import annotations

import argparse
import sys

from ..config import dbm_to_watts, load_config_file
from .experiment import ExperimentSpec, collect_rows, format_summary, rows_to_csv, summarize
from .figures import FIGURES, figure_spec


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--m", type=int, default=None, help="number of IRS elements")
    p.add_argument("--nt", type=int, default=None, help="BS transmit antennas")
    p.add_argument("--pmax-dbm", type=float, default=None, help="per-BS power budget in dBm")
    p.add_argument("--bits", type=int, choices=(1, 2), default=None,
                   help="also run the quantized scheme with this many bits")
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--time", action="store_true", help="record wall time per run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irs_comp", description="IRS-aided JP-CoMP experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("single-user", "single cell-edge user, two BSs"),
                        ("multi-user", "three BSs, three users"),
                        ("relay-compare", "IRS vs AF relay, direct links removed")):
        _common(sub.add_parser(name, help=help_))
    fig = sub.add_parser("figure", help="run a named figure sweep")
    fig.add_argument("name", choices=sorted(FIGURES))
    _common(fig)
    return parser


def _overrides(args) -> dict:
    over = load_config_file(args.config) if args.config else {}
    if args.nt is not None:
        over["tx_antennas"] = args.nt
    return over


def spec_from_args(args) -> ExperimentSpec:
    over = _overrides(args)
    realizations = args.realizations if args.realizations is not None else (50 if args.command == "figure" else 10)
    if args.command == "figure":
        spec = figure_spec(args.name, realizations=realizations, seed=args.seed, out=args.out, **over)
        # fixed scalars for the axes the figure does not sweep
        if args.m is not None and spec.sweep != "m":
            spec.overrides["num_irs_elements"] = args.m
        if args.pmax_dbm is not None and spec.sweep != "pmax_dbm":
            spec.overrides["max_power"] = dbm_to_watts(args.pmax_dbm)
        return spec

    base = "single-user" if args.command == "single-user" else "multi-user"
    if args.command == "relay-compare":
        over["direct_links"] = False
        schemes = ["optimized-continuous", "af-relay"]
    else:
        schemes = ["optimized-continuous", "random-phase", "no-irs"]
        if args.bits is not None:
            schemes.insert(1, f"quantized-b{args.bits}")
    if args.m is not None:
        over["num_irs_elements"] = args.m
    pmax = args.pmax_dbm if args.pmax_dbm is not None else 30.0
    return ExperimentSpec(preset=args.command, base=base, sweep="pmax_dbm", values=(pmax,),
                          realizations=realizations, schemes=tuple(schemes), seed=args.seed,
                          out=args.out, overrides=over, record_time=args.time)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
        spec.record_time = args.time
        spec.validate()
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    rows = collect_rows(spec, workers=args.workers)
    text = rows_to_csv(rows)
    if spec.out:
        with open(spec.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    print(format_summary(summarize(rows)))
    failed = sum(r.status != "ok" for r in rows)
    if failed == len(rows):
        print("every run failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
