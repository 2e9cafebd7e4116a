"""Transmitter-only view of DAC resolution: V_mod from the power meter,
measured pilot ratio and in-band DAC distortion, for EP and OP.

Needs no receiver simulation, so the whole table takes seconds.
"""

import argparse
import csv
import sys

from cvqkd_pilot.harness.config import RunConfig
from cvqkd_pilot.harness.psd import dac_distortion
from cvqkd_pilot.harness.runner import build_block, carrier_plan, transmitter_config
from cvqkd_pilot.transmitter import transmit
from cvqkd_pilot.wavecore import design_rrc


def row(mode, n_dac, rho_db, n_sym):
    cfg = RunConfig(pilot_mode=mode, n_dac=n_dac, rho_db=rho_db, n_sym=n_sym)
    s = cfg.system
    block, _ = build_block(cfg)
    tx = transmit(block, transmitter_config(cfg, carrier_plan(cfg), design_rrc(s.roll_off, s.rrc_span, s.sps)))
    return {
        "mode": mode,
        "n_dac": n_dac,
        "rho_db": rho_db,
        "v_mod": tx.v_mod,
        "rho_measured_db": tx.rho_measured_db,
        "dac_distortion_db": dac_distortion(cfg).relative_db,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", type=float, nargs="+", default=[21.0, 34.0])
    ap.add_argument("--bits", type=int, nargs="+", default=list(range(2, 13)))
    ap.add_argument("--n-sym", type=int, default=20000)
    args = ap.parse_args()
    out = csv.DictWriter(sys.stdout, ["mode", "n_dac", "rho_db", "v_mod", "rho_measured_db", "dac_distortion_db"])
    out.writeheader()
    for rho in args.rho:
        for mode in ("EP", "OP"):
            for n in args.bits:
                out.writerow(row(mode, n, rho, args.n_sym))


if __name__ == "__main__":
    main()
