"""Launched-field spectra for EP and OP at two DAC resolutions, as CSV files."""

import argparse
from pathlib import Path

from cvqkd_pilot.harness.config import RunConfig
from cvqkd_pilot.harness.psd import export_psd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/spectra"))
    ap.add_argument("--bits", type=int, nargs="+", default=[2, 10])
    ap.add_argument("--rho", type=float, default=34.0)
    args = ap.parse_args()
    for mode in ("EP", "OP"):
        for n in args.bits:
            path = args.out / f"tx_{mode.lower()}_{n}bit.csv"
            export_psd(RunConfig(pilot_mode=mode, n_dac=n, rho_db=args.rho, n_sym=50000), "tx_output", path)
            print(path)


if __name__ == "__main__":
    main()
