"""Single-use and asymptotic bounds and costs for phase + loss over a transmissivity grid."""
import argparse
import csv
import sys
from dataclasses import dataclass

import numpy as np

from qchanbound.bounds import single_use_bound, sql_bound
from qchanbound.incompat import incompat_asymptotic, incompat_single_use
from qchanbound.zoo import zoo_build


@dataclass
class SweepConfig:
    eta_min: float = 0.05
    eta_max: float = 0.95
    points: int = 19


def run(cfg: SweepConfig):
    for eta in np.linspace(cfg.eta_min, cfg.eta_max, cfg.points):
        ch = zoo_build("phase_loss", eta=eta)
        yield {"eta": eta,
               "F_phi": single_use_bound(ch.select([0])).value,
               "B_phi": sql_bound(ch.select([0])).value,
               "F_eta": single_use_bound(ch.select([1])).value,
               "F_joint": single_use_bound(ch).value,
               "I": incompat_single_use(ch).cost,
               "I_inf": incompat_asymptotic(ch).cost}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=SweepConfig.points)
    args = ap.parse_args(argv)
    rows = list(run(SweepConfig(points=args.points)))
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: f"{v:.10g}" for k, v in r.items()})
    return 0


if __name__ == "__main__":
    sys.exit(main())
