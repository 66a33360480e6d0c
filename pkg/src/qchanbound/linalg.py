"""Dense complex linear algebra used throughout the package.

Everything spectral here is Hermitian; LAPACK's ``heevd`` (via
:func:`numpy.linalg.eigh`) does the tridiagonal reduction and QR sweeps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidInput(ValueError):
    """Raised for malformed matrices (non-finite entries, wrong shapes)."""


class InvalidState(ValueError):
    """Raised when a density matrix is not positive semidefinite."""


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise InvalidInput(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    return a


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def herm_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def antiherm_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a - dag(a))


@dataclass(frozen=True)
class HermEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dag(v)


def herm_eig(a) -> HermEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized before decomposition, so tiny anti-Hermitian
    noise from upstream arithmetic is discarded.
    """
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise InvalidInput(f"herm_eig needs a square matrix, got {a.shape}")
    w, v = np.linalg.eigh(herm_part(a))
    return HermEig(w, v)


def operator_norm(a) -> float:
    """Largest singular value."""
    a = _as_matrix(a)
    if a.size == 0:
        return 0.0
    if a.shape[0] == a.shape[1] and np.allclose(a, dag(a), atol=1e-14 * (1 + np.abs(a).max())):
        return float(np.max(np.abs(np.linalg.eigvalsh(herm_part(a)))))
    return float(np.linalg.norm(a, 2))


def trace_norm(a) -> float:
    """Sum of singular values."""
    a = _as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def kron(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def psd_sqrt(a) -> np.ndarray:
    e = herm_eig(a)
    return (e.eigenvectors * np.sqrt(np.clip(e.eigenvalues, 0, None))) @ dag(e.eigenvectors)


def sylvester_sld(rho, drho, eps: float | None = None) -> np.ndarray:
    """Symmetric logarithmic derivative L with drho = (L rho + rho L)/2.

    Solved in the eigenbasis of ``rho``; pairs of eigenvalues whose sum is
    below ``eps`` (default ``1e-9 * tr(rho)``) contribute zero, so L is the
    SLD on the support of ``rho``.
    """
    rho = _as_matrix(rho)
    drho = _as_matrix(drho)
    if rho.shape != drho.shape or rho.shape[0] != rho.shape[1]:
        raise InvalidInput("rho and drho must be square and of equal shape")
    e = herm_eig(rho)
    if e.eigenvalues[0] < -1e-10:
        raise InvalidState(f"rho has negative eigenvalue {e.eigenvalues[0]:.3e}")
    if eps is None:
        eps = 1e-9 * float(np.real(np.trace(rho)))
    lam = np.clip(e.eigenvalues, 0, None)
    v = e.eigenvectors
    d = dag(v) @ herm_part(drho) @ v
    denom = lam[:, None] + lam[None, :]
    mask = denom > eps
    lmat = np.zeros_like(d)
    lmat[mask] = 2 * d[mask] / denom[mask]
    return v @ lmat @ dag(v)


def real_embed(h) -> np.ndarray:
    """Map a complex matrix to the real block form [[Re, -Im], [Im, Re]].

    PSD-ness and symmetry are preserved in both directions for Hermitian input;
    each eigenvalue of ``h`` appears twice in the embedded spectrum.
    """
    h = np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def real_embed_batch(h: np.ndarray) -> np.ndarray:
    """:func:`real_embed` applied over the leading axis of a stack."""
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) basis of n x n Hermitian matrices.

    Ordered as E_jj, then (E_jk + E_kj)/sqrt2 and i(E_jk - E_kj)/sqrt2 for j < k.
    """
    basis = []
    for j in range(n):
        m = np.zeros((n, n), dtype=complex)
        m[j, j] = 1
        basis.append(m)
    s = 1 / np.sqrt(2)
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[j, k] = m[k, j] = s
            basis.append(m)
            m = np.zeros((n, n), dtype=complex)
            m[j, k] = 1j * s
            m[k, j] = -1j * s
            basis.append(m)
    return basis


def hermitian_param_basis(n: int) -> np.ndarray:
    """Stack of n*n Hermitian matrices whose real span is all Hermitian n x n.

    Coordinates: diagonal entries, then (Re, Im) of each upper off-diagonal
    entry, so ``sum_k y_k B_k`` has entry [j,k] = y_re + i y_im above the diagonal.
    """
    out = np.zeros((n * n, n, n), dtype=complex)
    idx = 0
    for j in range(n):
        out[idx, j, j] = 1
        idx += 1
    for j in range(n):
        for k in range(j + 1, n):
            out[idx, j, k] = out[idx, k, j] = 1
            idx += 1
            out[idx, j, k] = 1j
            out[idx, k, j] = -1j
            idx += 1
    return out


def herm_from_params(y: np.ndarray, n: int) -> np.ndarray:
    return np.tensordot(np.asarray(y, dtype=float), hermitian_param_basis(n), axes=1)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return herm_part(z)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    z = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = z @ dag(z)
    return rho / np.trace(rho).real
