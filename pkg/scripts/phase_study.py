"""Pilot phase error against the true channel phase, for several MAF lengths
and linewidths on shared noise realizations.

    python scripts/phase_study.py --rho 21 --linewidth 200 --maf 0 500 2000 5000
    python scripts/phase_study.py --rho 25 --distance 50 --linewidth 200 2000 20000 --maf 2000
"""

import argparse

from cvqkd_pilot.harness.config import RunConfig
from cvqkd_pilot.harness.runner import run_phase_study


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--rho", type=float, default=21.0)
    ap.add_argument("--distance", type=float, default=100.0)
    ap.add_argument("--linewidth", type=float, nargs="+", default=[200.0])
    ap.add_argument("--maf", type=int, nargs="+", default=[0, 500, 2000, 5000])
    ap.add_argument("--copies", type=int, default=8)
    ap.add_argument("--n-sym", type=int, default=100_000)
    args = ap.parse_args()
    print("linewidth_hz,maf_m,phase_error_var,xi_phase_msnu")
    for lw in args.linewidth:
        cfg = RunConfig(
            rho_db=args.rho, distance_km=args.distance, linewidth_hz=lw, n_sym=args.n_sym, k_copies=args.copies
        )
        res = run_phase_study(cfg, args.maf)
        for m, v, x in zip(res.maf_values, res.phase_error_var, res.xi_phase):
            print(f"{lw:g},{m},{v:.4e},{1e3 * x:.3f}")


if __name__ == "__main__":
    main()
