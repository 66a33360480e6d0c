"""Recover an optimal probe from the optimal gauge and evaluate its QFI matrix.

Given the optimal gauge h*, an optimal input state is supported on the top
eigenspace of abar* = sum_x q_x alpha_x(h*) and makes Tr[rho alpha_x(h)]
stationary in every gauge direction:

    Re Tr[rho (i K^dag dh)(dK - i h* K)] = 0   for all Hermitian dh.

In the asymptotic mode dh is restricted to the kernel of h -> K^dag h K so
that the beta_x = 0 constraints are preserved.  Among the states satisfying
these linear constraints we return the one with the largest minimum
eigenvalue (restricted to the eigenspace), which is unique and interior.

The solver gauge is only accurate to roughly sqrt(duality gap), which leaves
O(1e-6) stationarity residuals.  The residual is affine in a gauge shift, so
the last step applies the minimum-norm shift (inside the allowed directions)
that zeroes it for the recovered state, and re-evaluates the norm there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sdp
from .bounds import BoundResult, SolverFailure, build_alpha_beta, single_use_bound, sql_bound
from .channels import ParamChannel
from .linalg import dag, herm_eig, hermitian_param_basis, operator_norm, real_embed_batch


class RecoveryFailure(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass
class RecoveryResult:
    rho_star: np.ndarray
    qfi_matrix: np.ndarray
    complex_qfi: np.ndarray
    imag_part_norm: float
    eigen_gap: float
    support_dim: int
    constraint_residual: float
    bound: BoundResult
    gauge: tuple = ()
    polished_value: float = float("nan")

    @property
    def weighted_trace(self) -> float:
        return float(np.dot(self.bound.weights, np.diag(self.qfi_matrix)))

    def to_json(self) -> dict:
        r = self.rho_star
        return {"rho_star": np.stack([r.real, r.imag], axis=-1).tolist(),
                "qfi_matrix": self.qfi_matrix.tolist(),
                "imag_part_norm": self.imag_part_norm, "eigen_gap": self.eigen_gap,
                "support_dim": self.support_dim, "constraint_residual": self.constraint_residual,
                "bound": self.bound.value, "polished_value": self.polished_value}


RECOVERY_GAP_TOL = 1e-12


def _tight_bound(ch, weights, mode) -> BoundResult:
    """The recovered state inherits the gauge error, so solve the bound more tightly."""
    fn = single_use_bound if mode == "single_use" else sql_bound
    try:
        return fn(ch, weights, gap_tol=RECOVERY_GAP_TOL)
    except SolverFailure:
        return fn(ch, weights)


def gauge_directions(kraus: np.ndarray, sql: bool, tol: float = 1e-10) -> np.ndarray:
    """Hermitian basis for dh; in sql mode only directions with K^dag dh K = 0."""
    r = kraus.shape[0]
    basis = hermitian_param_basis(r)
    if not sql:
        return basis
    imgs = np.einsum("ajk,jdb,kdc->abc", basis, kraus.conj(), kraus)
    flat = np.concatenate([imgs.reshape(len(basis), -1).real, imgs.reshape(len(basis), -1).imag], axis=1)
    u, s, vt = np.linalg.svd(flat.T, full_matrices=True)
    rank = int(np.sum(s > tol * max(1.0, s[0] if len(s) else 0.0)))
    null = vt[rank:]
    return np.tensordot(null, basis, axes=1)


def constraint_operators(ch: ParamChannel, gauge, sql: bool) -> list:
    """Operators C with constraint Re Tr[rho C] = 0, one per (x, dh)."""
    ops = []
    for x in range(ch.num_params):
        k, dk = ch.kraus[x], ch.dkraus[x]
        d = dk - 1j * np.tensordot(gauge[x], k, axes=1)
        for dh in gauge_directions(k, sql):
            ops.append(1j * np.einsum("jk,jab,kac->bc", dh, k.conj(), d))
    return ops


def polish_gauge(ch: ParamChannel, rho: np.ndarray, gauge, sql: bool) -> list:
    """Shift each h_x by the least-norm Hermitian step that makes rho stationary."""
    out = []
    for x in range(ch.num_params):
        k, dk = ch.kraus[x], ch.dkraus[x]
        h = np.asarray(gauge[x], dtype=complex)
        dirs = gauge_directions(k, sql)
        if len(dirs) == 0:
            out.append(h)
            continue
        d = dk - 1j * np.tensordot(h, k, axes=1)
        # Tr[rho K_j^dag K_l] and Tr[rho K_j^dag D_k]; G1 is affine in the shift
        gram = np.einsum("bc,jac,lab->jl", rho, k.conj(), k)
        cross = np.einsum("bc,jac,kab->jk", rho, k.conj(), d)
        g = np.array([np.sum(1j * dh * cross).real for dh in dirs])
        lin = np.array([[np.sum((dh @ db) * gram).real for db in dirs] for dh in dirs])
        step = np.linalg.lstsq(lin, -g, rcond=1e-12)[0]
        out.append(h + np.tensordot(step, dirs, axes=1))
    return out


def constraint_residual(rho, ops) -> float:
    if not ops:
        return 0.0
    return float(max(abs(np.trace(rho @ c).real) for c in ops))


def recover_optimal_state(ch: ParamChannel, weights=None, mode: str = "single_use",
                          cluster_tol: float = 1e-7, bound: BoundResult | None = None,
                          rank_tol: float = 1e-4, tie_break: np.ndarray | None = None) -> RecoveryResult:
    """Optimal probe for the weighted bound.

    Among the states satisfying the stationarity constraints the default pick
    has the largest minimum eigenvalue.  With ``tie_break`` (a Hermitian
    operator on the input) we instead pick the one minimizing Tr[rho S].
    """
    if mode not in ("single_use", "sql"):
        raise ValueError(f"unknown mode {mode!r}")
    if bound is None:
        bound = _tight_bound(ch, weights, mode)
    w = bound.weights
    gauge = bound.gauge
    abar = sum(w[x] * build_alpha_beta(ch, gauge, x)[0] for x in range(ch.num_params))
    eig = herm_eig(abar)
    lam = eig.eigenvalues
    top = lam[-1]
    inside = lam >= top - cluster_tol * max(operator_norm(abar), 1e-300)
    v = eig.eigenvectors[:, inside]
    k = v.shape[1]
    gap = float(top - lam[~inside][-1]) if np.any(~inside) else float("inf")

    ops = constraint_operators(ch, gauge, mode == "sql")
    sb = hermitian_param_basis(k)
    # Re Tr[V s V^dag C] = Re Tr[s V^dag C V]  ->  rows over the k*k real coordinates of s
    rows = np.array([[np.trace(b @ (dag(v) @ c @ v)).real for b in sb] for c in ops]).reshape(-1, len(sb))
    trace_row = np.array([np.trace(b).real for b in sb])
    # drop numerically dependent rows; h* is only accurate to about sqrt(gap)
    if len(rows):
        u, s, vt = np.linalg.svd(rows, full_matrices=False)
        keep = s > rank_tol * max(1.0, s[0])
        rows = vt[keep] * s[keep, None]
    a_eq = np.vstack([rows, trace_row])
    b_eq = np.concatenate([np.zeros(len(rows)), [1.0]])

    if tie_break is None:
        m = len(sb) + 1
        coeffs = np.zeros((m, k, k), complex)
        coeffs[:-1] = sb
        coeffs[-1] = -np.eye(k)
        c = np.zeros(m)
        c[-1] = -1.0
        a_eq = np.hstack([a_eq, np.zeros((len(a_eq), 1))])
    else:
        m = len(sb)
        coeffs = np.asarray(sb, dtype=complex)
        s_red = dag(v) @ np.asarray(tie_break, dtype=complex) @ v
        c = np.array([np.trace(b @ s_red).real for b in sb])
    blk = sdp.LmiBlock(np.zeros((2 * k, 2 * k)), np.arange(m), real_embed_batch(coeffs))
    prob = sdp.SdpProblem(m, c, [blk], a_eq, b_eq)
    sol = sdp.solve(prob)
    if sol.status != sdp.OPTIMAL:
        raise RecoveryFailure(f"recovery feasibility problem ended with status {sol.status}")
    sigma = np.tensordot(sol.y[:len(sb)], sb, axes=1)
    rho = v @ sigma @ dag(v)
    rho = 0.5 * (rho + dag(rho))
    gauge = polish_gauge(ch, rho, gauge, mode == "sql")
    res = constraint_residual(rho, constraint_operators(ch, gauge, mode == "sql"))
    abar = sum(w[x] * build_alpha_beta(ch, gauge, x)[0] for x in range(ch.num_params))
    polished = 4 * operator_norm(abar)
    f, cplx = (qfi_matrix_of_recovered(rho, ch, gauge) if ch.shared
               else _diag_qfi_of_recovered(rho, ch, gauge))
    return RecoveryResult(rho, f, cplx, float(np.abs(cplx.imag).max()), gap, k, res, bound,
                          tuple(gauge), float(polished))


def _diag_qfi_of_recovered(rho, ch: ParamChannel, gauge):
    """Multi-channel case: only the per-channel diagonal entries are defined."""
    vals = []
    for x in range(ch.num_params):
        d = ch.dkraus[x] - 1j * np.tensordot(np.asarray(gauge[x]), ch.kraus[x], axes=1)
        vals.append(4 * np.trace(rho @ np.einsum("kab,kac->bc", d.conj(), d)))
    cplx = np.diag(np.array(vals))
    return cplx.real.copy(), cplx


def qfi_matrix_of_recovered(rho, ch: ParamChannel, gauge):
    """4 Re Tr[rho D_x^dag D_y] with D_x = dK_x - i h_x K (single channel, shared Kraus list)."""
    if not ch.shared:
        raise ValueError("the QFI matrix needs one shared Kraus list")
    ds = []
    for x in range(ch.num_params):
        h = np.asarray(gauge[x])
        if h.shape != (ch.rank(x), ch.rank(x)):
            raise ValueError("gauge dimensions do not match the Kraus rank")
        ds.append(ch.dkraus[x] - 1j * np.tensordot(h, ch.kraus[x], axes=1))
    p = ch.num_params
    cplx = np.empty((p, p), complex)
    for i in range(p):
        for j in range(p):
            cplx[i, j] = 4 * np.trace(rho @ np.einsum("kab,kac->bc", ds[i].conj(), ds[j]))
    f = cplx.real
    return 0.5 * (f + f.T), cplx


def check_holevo_saturation(complex_qfi, tol: float = 1e-8) -> bool:
    """True when the imaginary part of the complex QFI matrix vanishes within tol."""
    return bool(np.abs(np.asarray(complex_qfi).imag).max() <= tol)


def purified_probe(rho: np.ndarray) -> np.ndarray:
    """|psi> = vec(sqrt(rho)) on system (x) ancilla, system index first."""
    e = herm_eig(rho)
    sq = (e.eigenvectors * np.sqrt(np.clip(e.eigenvalues, 0, None))) @ dag(e.eigenvectors)
    psi = sq.reshape(-1)
    return psi / np.linalg.norm(psi)
