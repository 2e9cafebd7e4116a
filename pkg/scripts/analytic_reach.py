"""Distance at which the asymptotic key rate reaches zero, for fixed excess
noise, from the closed-form rates alone (no waveform simulation)."""

import argparse

import numpy as np
from scipy import optimize

from cvqkd_pilot.channel import ChannelSpec, fiber_transmittance
from cvqkd_pilot.estimation import holevo_bound, mutual_information, raw_secret_key_rate


def skr(d_km, xi, v_mod, eta, v_en, beta):
    t = fiber_transmittance(ChannelSpec(d_km, 0.16))
    i_ab = mutual_information(v_mod, t, eta, xi, v_en)
    return raw_secret_key_rate(i_ab, holevo_bound(v_mod, t, eta, xi, v_en), beta, 100e6)


def reach(xi, d_max=1000.0, **kw):
    grid = np.arange(25.0, d_max + 25.0, 25.0)
    lo = 1.0
    for hi in grid:
        if skr(hi, xi, **kw) <= 0:
            return optimize.brentq(skr, lo, hi, args=(xi, *kw.values()))
        lo = hi
    return float("inf")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--xi-msnu", type=float, nargs="+", default=[5, 10, 20, 30, 50, 80, 100])
    ap.add_argument("--v-mod", type=float, default=2.5)
    ap.add_argument("--eta", type=float, default=0.7)
    ap.add_argument("--v-en", type=float, default=0.1)
    ap.add_argument("--beta", type=float, default=0.95)
    args = ap.parse_args()
    kw = dict(v_mod=args.v_mod, eta=args.eta, v_en=args.v_en, beta=args.beta)
    print("xi_msnu,reach_km")
    for x in args.xi_msnu:
        print(f"{x:g},{reach(1e-3 * x, **kw):.1f}")


if __name__ == "__main__":
    main()
