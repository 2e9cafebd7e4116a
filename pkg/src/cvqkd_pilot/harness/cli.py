"""Command-line entry point: ``run``, ``sweep``, ``psd``, ``calibrate``, ``selfcheck``.

Exit codes: 0 success, 2 configuration error, 3 physics or sync failure,
4 I/O error. ``selfcheck`` exits 3 if any check fails.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

from ..errors import ConfigurationError, SimulationError
from .config import load_config, load_sweep

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, value = (p.strip() for p in item.split("=", 1))
        out[key] = value
    if args.seed is not None:
        out["master_seed"] = args.seed
    if args.workers is not None:
        out["n_workers"] = args.workers
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}" if math.isfinite(v) else str(v)
    return str(v)


def cmd_run(args) -> int:
    from .runner import run_single
    from .sweep import append_row, result_row

    cfg = load_config(args.config, _overrides(args))
    res = run_single(cfg)
    for key, value in asdict(res).items():
        print(f"{key} = {_fmt(value)}")
    if args.out:
        out = Path(args.out)
        if out.exists():
            out.unlink()
        append_row(out, result_row(math.nan, res))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .sweep import CSV_COLUMNS, run_sweep

    if args.config is None:
        raise ConfigurationError("sweep needs --config <sweep file>")
    spec = load_sweep(args.config, _overrides(args))
    if args.out:
        spec = replace(spec, output_path=Path(args.out))
    rows = run_sweep(spec, resume=not args.fresh)
    writer = csv.DictWriter(sys.stdout, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return EXIT_OK


def cmd_psd(args) -> int:
    from .psd import export_psd

    cfg = load_config(args.config, _overrides(args))
    out = args.out or f"psd_{args.stage}.csv"
    freqs, _ = export_psd(cfg, args.stage, out, args.segment)
    print(f"wrote {freqs.size} points to {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .runner import calibrate

    rec = calibrate(load_config(args.config, _overrides(args)))
    for key, value in asdict(rec).items():
        print(f"{key} = {_fmt(value)}")
    print(f"v_en = {_fmt(rec.v_en)}")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_all

    results = run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return EXIT_OK if n_fail == 0 else EXIT_PHYSICS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--out", help="output file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cvqkd-sim", description="CV-QKD pilot-tone simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one configuration").set_defaults(fn=cmd_run)
    p = sub.add_parser("sweep", parents=[common], help="sweep one axis")
    p.add_argument("--fresh", action="store_true", help="ignore rows already in the output file")
    p.set_defaults(fn=cmd_sweep)
    p = sub.add_parser("psd", parents=[common], help="spectrum at a probe point")
    p.add_argument("--stage", choices=["tx_output", "rx_output"], default="tx_output")
    p.add_argument("--segment", type=int, default=4096, help="Welch segment length")
    p.set_defaults(fn=cmd_psd)
    sub.add_parser("calibrate", parents=[common], help="print the noise calibration").set_defaults(fn=cmd_calibrate)
    sub.add_parser("selfcheck", parents=[common], help="built-in checks").set_defaults(fn=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
