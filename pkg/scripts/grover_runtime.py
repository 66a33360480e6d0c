"""Per-time bounds and runtime lower bounds for noisy Grover search versus database size."""
import argparse
import math
import sys

from qchanbound.discrimination import grover_rate_bound, grover_runtime_bound


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dmax", type=int, default=6)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--omega", type=float, default=1.0)
    ap.add_argument("--delta", type=float, default=math.pi / 2)
    args = ap.parse_args(argv)
    print("   d  rate_deph  closed_deph  rate_eras  closed_eras  T/d_deph  T/d_eras")
    g = args.gamma
    for d in range(2, args.dmax + 1):
        rd, re = grover_rate_bound("dephasing", d, g), grover_rate_bound("erasure", d, g)
        td = grover_runtime_bound("dephasing", d, g, args.omega, args.delta)
        te = grover_runtime_bound("erasure", d, g, args.omega, args.delta)
        print(f"{d:4d} {rd:10.6f} {4 * (d - 1) / (g * (d + 2)):12.6f} {re:10.6f} {4 * (d - 1) / (d * g):12.6f}"
              f" {td:9.6f} {te:9.6f}")
    cap = grover_runtime_bound("dephasing", math.inf, g, args.omega, args.delta)
    print(f" inf {4 / g:10.6f} {'':12s} {'':10s} {'':12s} {cap:9.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
