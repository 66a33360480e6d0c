"""Gap between the single-use channel bound and the best pure probe found by local search.

The bound is an upper limit on the total QFI over probes on system (x) ancilla;
the gap shrinks to solver precision when the ancilla is as large as the input.
"""
import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from qchanbound.bounds import single_use_bound
from qchanbound.states import probe_oracle_max_total_qfi
from qchanbound.zoo import random_isometry_channel


@dataclass
class GapConfig:
    channels: int = 20
    restarts: int = 4
    max_dim_out: int = 3


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--channels", type=int, default=GapConfig.channels)
    ap.add_argument("--restarts", type=int, default=GapConfig.restarts)
    args = ap.parse_args(argv)
    cfg = GapConfig(args.channels, args.restarts)
    print("seed dim_out        bound       oracle     rel_gap   secs")
    worst = 0.0
    for seed in range(cfg.channels):
        rng = np.random.default_rng(seed)
        dim_out = 2 + seed % (cfg.max_dim_out - 1)
        ch = random_isometry_channel(rng, dim_in=2, dim_out=dim_out, rank=2)
        t0 = time.perf_counter()
        b = single_use_bound(ch).value
        o = probe_oracle_max_total_qfi(ch, restarts=cfg.restarts, seed=seed).value
        gap = abs(b - o) / (1 + b)
        worst = max(worst, gap)
        print(f"{seed:4d} {dim_out:7d} {b:12.8f} {o:12.8f} {gap:10.2e} {time.perf_counter() - t0:6.2f}")
    print(f"worst relative gap {worst:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
