"""State-level QFI, distances between states, and a brute-force probe optimizer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .channels import ParamChannel
from .linalg import InvalidInput, InvalidState, dag, herm_eig, psd_sqrt, sylvester_sld, trace_norm


def check_density(rho, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidInput(f"density matrix must be square, got {rho.shape}")
    if np.abs(rho - dag(rho)).max() > tol:
        raise InvalidState("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > tol:
        raise InvalidState(f"density matrix has trace {np.trace(rho).real:.12g}")
    if herm_eig(rho).eigenvalues[0] < -tol:
        raise InvalidState("density matrix has a negative eigenvalue")
    return rho


@dataclass(frozen=True)
class StateModel:
    rho: np.ndarray
    drho: tuple

    def __post_init__(self):
        rho = check_density(self.rho)
        drho = tuple(np.asarray(d, dtype=complex) for d in self.drho)
        for d in drho:
            if d.shape != rho.shape or np.abs(d - dag(d)).max() > 1e-10 or abs(np.trace(d)) > 1e-10:
                raise InvalidState("state derivatives must be Hermitian and traceless")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "drho", drho)


def qfi_matrix_sld(model: StateModel, eps: float | None = None):
    """Real QFI matrix Re Tr[rho L_i L_j] and the complex matrix Tr[rho L_i L_j]."""
    ls = [sylvester_sld(model.rho, d, eps) for d in model.drho]
    p = len(ls)
    c = np.empty((p, p), complex)
    for i in range(p):
        for j in range(p):
            c[i, j] = np.trace(model.rho @ ls[i] @ ls[j])
    f = c.real
    return 0.5 * (f + f.T), c


def qfi_diagonal(rho: np.ndarray, drhos, eps: float | None = None) -> np.ndarray:
    """Diagonal QFI entries 2 sum |<i|d rho|j>|^2 / (l_i + l_j) over the support."""
    e = herm_eig(rho)
    lam = np.clip(e.eigenvalues, 0, None)
    if eps is None:
        eps = 1e-9 * lam.sum()
    den = lam[:, None] + lam[None, :]
    mask = den > eps
    out = []
    for d in drhos:
        t = dag(e.eigenvectors) @ d @ e.eigenvectors
        out.append(2 * np.sum(np.abs(t[mask]) ** 2 / den[mask]))
    return np.array(out)


def qfi_matrix_purification(jac: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """4 Re[J^dag J - J^dag |psi><psi| J] for a pure-state family with Jacobian J."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise InvalidInput("purification must be normalized")
    jac = np.asarray(jac, dtype=complex).reshape(len(psi), -1)
    ov = dag(jac) @ psi
    f = 4 * (dag(jac) @ jac - np.outer(ov, ov.conj())).real
    return 0.5 * (f + f.T)


def fidelity(r1, r2) -> float:
    """Root fidelity ||sqrt(r1) sqrt(r2)||_1."""
    r1, r2 = check_density(r1), check_density(r2)
    if r1.shape != r2.shape:
        raise InvalidInput("states have different dimensions")
    return float(min(1.0, trace_norm(psd_sqrt(r1) @ psd_sqrt(r2))))


def trace_distance(r1, r2) -> float:
    r1, r2 = check_density(r1), check_density(r2)
    if r1.shape != r2.shape:
        raise InvalidInput("states have different dimensions")
    return float(min(1.0, 0.5 * trace_norm(r1 - r2)))


def bures_angle(r1, r2) -> float:
    return float(np.arccos(np.clip(fidelity(r1, r2), 0.0, 1.0)))


# --------------------------------------------------------------------------
# probe optimization on the extended channel


def extended_output(ch: ParamChannel, psi: np.ndarray, x: int):
    """Output state and its theta_x derivative for the pure probe psi on system (x) ancilla."""
    din = ch.dim_in
    m = psi.reshape(din, -1)  # system index first
    a = np.tensordot(ch.kraus[x], m, axes=([2], [0]))  # (r, dout, anc)
    da = np.tensordot(ch.dkraus[x], m, axes=([2], [0]))
    rho = np.einsum("jai,jbk->aibk", a, a.conj()).reshape(a.shape[1] * a.shape[2], -1)
    t = np.einsum("jai,jbk->aibk", da, a.conj()).reshape(rho.shape)
    return rho, t + dag(t)


def total_qfi_of_probe(ch: ParamChannel, psi: np.ndarray, weights) -> float:
    psi = psi / np.linalg.norm(psi)
    total = 0.0
    for x in range(ch.num_params):
        rho, drho = extended_output(ch, psi, x)
        total += weights[x] * qfi_diagonal(rho, [drho])[0]
    return float(total)


@dataclass(frozen=True)
class OracleResult:
    value: float
    probe: np.ndarray


def probe_oracle_max_total_qfi(ch: ParamChannel, weights=None, restarts: int = 16,
                               seed: int = 0, gtol: float = 1e-7) -> OracleResult:
    """Best weighted total QFI over pure probes on system (x) ancilla (ancilla dim = dim_in).

    Quasi-Newton ascent from random starts; the result is a lower bound on the
    single-use channel bound, and tends to it as restarts grow.
    """
    w = np.ones(ch.num_params) if weights is None else np.asarray(weights, float)
    n = ch.dim_in * ch.dim_in
    rng = np.random.default_rng(seed)

    def unpack(v):
        return v[:n] + 1j * v[n:]

    def neg(v):
        nv = np.linalg.norm(v)
        if nv < 1e-12:
            return 0.0
        return -total_qfi_of_probe(ch, unpack(v / nv), w)

    best_val, best_psi = -np.inf, None
    for _ in range(restarts):
        v0 = rng.standard_normal(2 * n)
        res = minimize(neg, v0, method="BFGS", options={"gtol": gtol, "maxiter": 2000})
        if -res.fun > best_val:
            best_val = -res.fun
            best_psi = unpack(res.x / np.linalg.norm(res.x))
    return OracleResult(float(best_val), best_psi)
