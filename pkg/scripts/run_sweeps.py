"""Run shipped sweep files, resuming any CSV rows already on disk.

    python scripts/run_sweeps.py                       # every configs/sweep_*.cfg
    python scripts/run_sweeps.py configs/sweep_maf.cfg --workers 4 --set k_copies=10
"""

import argparse
import logging
from pathlib import Path

from cvqkd_pilot.harness.config import load_sweep
from cvqkd_pilot.harness.sweep import run_sweep

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("files", nargs="*", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--fresh", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    overrides = dict(item.split("=", 1) for item in args.set)
    overrides["n_workers"] = args.workers
    for path in args.files or sorted((ROOT / "configs").glob("sweep_*.cfg")):
        spec = load_sweep(path, overrides)
        logging.info("%s: %s over %d values -> %s", path.name, spec.axis, len(spec.values), spec.output_path)
        for row in run_sweep(spec, resume=not args.fresh):
            logging.info("  %s=%s xi=%s mSNU skr=%s %s", spec.axis, row["axis_value"], row["xi_a_msnu"], row["skr_bps"], row["status"])


if __name__ == "__main__":
    main()
