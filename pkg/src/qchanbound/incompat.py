"""Probe-incompatibility costs with natural weights, and a diagonality diagnostic.

The cost compares the best joint probe against the per-parameter optima:

    cost = p / B_joint(q),   q_x = 1 / B_x,

so that 1 means one probe is optimal for every parameter and p means the
parameters cannot share any probe at all.  Both the single-use and the
asymptotic (beta = 0) variants use the same recipe.  This is a lower bound on
the full max-min cost, which we do not attempt.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundResult, single_use_bound, sql_bound
from .channels import ParamChannel
from .recovery import purified_probe, recover_optimal_state
from .states import StateModel, extended_output, qfi_matrix_sld

DEGENERATE_TOL = 1e-10


class DegenerateParameter(ValueError):
    def __init__(self, labels, values):
        super().__init__(f"parameters {list(labels)} have vanishing bounds {list(values)}")
        self.labels = list(labels)
        self.values = list(values)


@dataclass
class IncompatReport:
    mode: str
    singles: np.ndarray
    joint: float
    cost: float
    labels: tuple
    naturalness: float = float("nan")
    joint_result: BoundResult | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {"mode": self.mode, "kind": "lower bound (natural weights)",
                "labels": list(self.labels), "singles": [float(v) for v in self.singles],
                "weights": [float(1 / v) for v in self.singles], "joint": self.joint,
                "cost": self.cost, "naturalness": self.naturalness}


def _incompat(ch: ParamChannel, mode: str, with_naturalness: bool) -> IncompatReport:
    p = ch.num_params
    if p < 2:
        raise ValueError("incompatibility needs at least two parameters")
    fn = single_use_bound if mode == "single_use" else sql_bound
    singles = np.array([fn(ch.select([x])).value for x in range(p)])
    if np.any(singles <= DEGENERATE_TOL):
        bad = [i for i in range(p) if singles[i] <= DEGENERATE_TOL]
        raise DegenerateParameter([ch.labels[i] for i in bad], singles[bad])
    joint = fn(ch, 1.0 / singles)
    nat = naturalness_check(ch) if with_naturalness else float("nan")
    return IncompatReport(mode, singles, joint.value, p / joint.value, ch.labels, nat, joint)


def incompat_single_use(ch: ParamChannel, naturalness: bool = False) -> IncompatReport:
    return _incompat(ch, "single_use", naturalness)


def incompat_asymptotic(ch: ParamChannel, naturalness: bool = False) -> IncompatReport:
    """Raises HeisenbergPossible when some parameter fails the Kraus-span condition."""
    return _incompat(ch, "sql", naturalness)


def probe_qfi_matrix(ch: ParamChannel, psi: np.ndarray):
    """Full SLD QFI matrix of the extended output for a pure probe (shared Kraus list only)."""
    if not ch.shared:
        raise ValueError("the QFI matrix needs one shared Kraus list")
    rho = None
    drhos = []
    for x in range(ch.num_params):
        rho, d = extended_output(ch, psi, x)
        drhos.append(d)
    return qfi_matrix_sld(StateModel(rho, tuple(drhos)))


def naturalness_check(ch: ParamChannel) -> float:
    """max_x ||offdiag F||_F / ||diag F|| for the QFI matrix of each single-parameter optimal probe.

    Near zero means the parametrization is natural: the probes that are best
    for one parameter carry no cross-talk with the others.  The x-optimal
    probe is often not unique; ties are broken toward the probe with the
    least plain-gauge sensitivity sum_{y != x} dK_y^dag dK_y to the other
    parameters, since |F_xy| <= sqrt(F_xx F_yy).
    """
    worst = 0.0
    for x in range(ch.num_params):
        others = sum(np.einsum("kab,kac->bc", ch.dkraus[y].conj(), ch.dkraus[y])
                     for y in range(ch.num_params) if y != x)
        rec = recover_optimal_state(ch.select([x]), mode="single_use", tie_break=others)
        f, _ = probe_qfi_matrix(ch, purified_probe(rec.rho_star))
        diag = np.linalg.norm(np.diag(f))
        off = np.linalg.norm(f - np.diag(np.diag(f)))
        if diag > 0:
            worst = max(worst, off / diag)
    return float(worst)


def reparametrized(ch: ParamChannel, a) -> ParamChannel:
    """Linear reparametrization: derivative Kraus lists become dK'_x = sum_y a_xy dK_y."""
    a = np.asarray(a, dtype=float)
    p = ch.num_params
    if a.shape != (p, p) or abs(np.linalg.det(a)) < 1e-12:
        raise ValueError("reparametrization matrix must be square and invertible")
    if not ch.shared:
        raise ValueError("reparametrization needs one shared Kraus list")
    dks = tuple(sum(a[x, y] * ch.dkraus[y] for y in range(p)) for x in range(p))
    return ParamChannel(ch.kraus, dks, tuple(f"r{x}" for x in range(p)), ch.theta_star)
