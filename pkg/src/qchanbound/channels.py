"""Parametric Kraus channels and Lindblad generators.

A :class:`ParamChannel` carries, for every parameter x, a Kraus list K_x of
shape (r_x, dim_out, dim_in) and the matching derivative list dK_x.  When all
parameters act on one channel the Kraus lists are shared and only the
derivatives differ; a collection of distinct channels (one parameter each) is
the same data with per-x Kraus lists.

Vectorization convention: |M> = M.reshape(-1), i.e. sum_ij M_ij |i>_out |j>_in.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import dag, hermitian_param_basis, operator_norm

CPTP_TOL = 1e-10


class InvalidChannel(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


class HeisenbergPossible(ValueError):
    """Raised when the Kraus (or Lindblad) span condition fails for some parameter."""

    def __init__(self, params, residuals):
        self.params = list(params)
        self.residuals = list(residuals)
        super().__init__(f"span condition violated for parameters {self.params}")


def _stack(ops) -> np.ndarray:
    a = np.asarray(ops, dtype=complex)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise InvalidChannel(f"Kraus list must have shape (r, d_out, d_in), got {a.shape}")
    return a


@dataclass(frozen=True)
class ParamChannel:
    kraus: tuple
    dkraus: tuple
    labels: tuple
    theta_star: np.ndarray = field(default=None)

    def __post_init__(self):
        k = tuple(_stack(a) for a in self.kraus)
        dk = tuple(_stack(a) for a in self.dkraus)
        if len(k) != len(dk) or not k:
            raise InvalidChannel("need one Kraus list and one derivative list per parameter")
        shape = k[0].shape[1:]
        for a, b in zip(k, dk):
            if a.shape != b.shape:
                raise InvalidChannel(f"derivative shape {b.shape} does not match Kraus shape {a.shape}")
            if a.shape[1:] != shape:
                raise InvalidChannel("all parameters must share input/output dimensions")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise InvalidChannel("non-finite Kraus entries")
        labels = tuple(self.labels) if self.labels else tuple(f"theta{i}" for i in range(len(k)))
        if len(labels) != len(k):
            raise InvalidChannel("one label per parameter required")
        theta = np.zeros(len(k)) if self.theta_star is None else np.asarray(self.theta_star, float)
        object.__setattr__(self, "kraus", k)
        object.__setattr__(self, "dkraus", dk)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "theta_star", theta)

    @classmethod
    def single(cls, kraus, dkraus, labels=None, theta_star=None) -> "ParamChannel":
        """One channel, several parameters: shared Kraus list, one derivative list per parameter."""
        k = _stack(kraus)
        return cls(tuple(k for _ in dkraus), tuple(dkraus), labels, theta_star)

    @property
    def num_params(self) -> int:
        return len(self.kraus)

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[2]

    def rank(self, x: int) -> int:
        return self.kraus[x].shape[0]

    @property
    def shared(self) -> bool:
        k0 = self.kraus[0]
        return all(k.shape == k0.shape and np.array_equal(k, k0) for k in self.kraus)

    def select(self, xs) -> "ParamChannel":
        xs = list(xs)
        return ParamChannel(tuple(self.kraus[x] for x in xs), tuple(self.dkraus[x] for x in xs),
                            tuple(self.labels[x] for x in xs), self.theta_star[xs])

    def rescaled(self, scales) -> "ParamChannel":
        """Reparametrize theta_x -> theta_x / c_x, i.e. multiply derivatives by c_x."""
        return ParamChannel(self.kraus, tuple(c * d for c, d in zip(scales, self.dkraus)),
                            self.labels, self.theta_star)

    def mixed(self, unitaries) -> "ParamChannel":
        """Kraus gauge transform K_j -> sum_k u_jk K_k (derivatives co-transformed)."""
        k = tuple(np.tensordot(u, a, axes=1) for u, a in zip(unitaries, self.kraus))
        dk = tuple(np.tensordot(u, a, axes=1) for u, a in zip(unitaries, self.dkraus))
        return ParamChannel(k, dk, self.labels, self.theta_star)

    def apply(self, rho: np.ndarray, x: int = 0) -> np.ndarray:
        k = self.kraus[x]
        return np.einsum("jab,bc,jdc->ad", k, rho, k.conj())

    def apply_derivative(self, rho: np.ndarray, x: int) -> np.ndarray:
        k, dk = self.kraus[x], self.dkraus[x]
        t = np.einsum("jab,bc,jdc->ad", dk, rho, k.conj())
        return t + dag(t)


@dataclass(frozen=True)
class CptpReport:
    residuals: tuple
    passed: bool


def validate_cptp(ch: ParamChannel, tol: float = CPTP_TOL) -> CptpReport:
    """Max-abs residual of sum_j K_j^dag K_j - I for every parameter."""
    res = []
    for k in ch.kraus:
        m = np.einsum("jab,jac->bc", k.conj(), k)
        res.append(float(np.abs(m - np.eye(k.shape[2])).max()))
    return CptpReport(tuple(res), all(r <= tol for r in res))


def choi_matrix(ch: ParamChannel, x: int = 0):
    """Unnormalized Choi matrix sum_j |K_j><K_j| and its derivative wrt theta_x."""
    k = ch.kraus[x].reshape(ch.rank(x), -1)
    dk = ch.dkraus[x].reshape(ch.rank(x), -1)
    omega = k.T @ k.conj()
    d = dk.T @ k.conj()
    return omega, d + dag(d)


# --------------------------------------------------------------------------
# gauge algebra shared with the bound engine


def gauge_maps(kraus: np.ndarray, dkraus: np.ndarray):
    """Affine pieces of D(h) = dK - i h K and beta(h) = D(h)^dag K in real gauge coordinates.

    Returns (d0, e, b0, m) with D = d0 + sum_a y_a e[a] (stacked (r*d_out, d_in))
    and beta = b0 + sum_a y_a m[a].
    """
    r, dout, din = kraus.shape
    basis = hermitian_param_basis(r)
    kst = kraus.reshape(r * dout, din)
    d0 = dkraus.reshape(r * dout, din)
    e = -1j * np.einsum("ajk,kbc->ajbc", basis, kraus).reshape(len(basis), r * dout, din)
    b0 = dag(d0) @ kst
    m = np.einsum("aji,jk->aik", e.conj(), kst)
    return d0, e, b0, m


def _real_rows(b0: np.ndarray, m: np.ndarray):
    """Real linear system A y = rhs equivalent to b0 + sum_a y_a m[a] = 0."""
    a = np.concatenate([m.reshape(len(m), -1).real, m.reshape(len(m), -1).imag], axis=1).T
    rhs = -np.concatenate([b0.reshape(-1).real, b0.reshape(-1).imag])
    return a, rhs


@dataclass(frozen=True)
class SpanCheck:
    satisfied: bool
    residual: float
    solution: np.ndarray


def _span_check(b0, m, tol, scale) -> SpanCheck:
    a, rhs = _real_rows(b0, m)
    y, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    resid = float(np.linalg.norm(a @ y - rhs))
    scale = max(scale, float(np.linalg.norm(rhs)))
    return SpanCheck(resid <= tol * scale or scale == 0.0, resid, y)


def hks_check(ch: ParamChannel, x: int, tol: float = 1e-9) -> SpanCheck:
    """Is beta_x(h) = 0 solvable with Hermitian h?  Returns the h coordinates found."""
    _, _, b0, m = gauge_maps(ch.kraus[x], ch.dkraus[x])
    # residuals are judged against the size of the derivative, not of beta at h = 0
    return _span_check(b0, m, tol, float(np.linalg.norm(ch.dkraus[x])))


# --------------------------------------------------------------------------
# Lindblad models


@dataclass(frozen=True)
class LindbladModel:
    """Generators H_x with collapse operators L_{x,j}; one parameter per Hamiltonian.

    ``sectors`` optionally lists orthogonal projectors between which no coherence
    is physical (a superselection rule, e.g. particle number).  Their span is
    added to the gauge freedom at no cost, which is the limit of infinitely
    strong dephasing between sectors.
    """

    hamiltonians: tuple
    collapse_ops: tuple
    labels: tuple = ()
    sectors: tuple = ()

    def __post_init__(self):
        hs = tuple(np.asarray(h, dtype=complex) for h in self.hamiltonians)
        ls = tuple(_stack(l) if len(l) else np.zeros((0,) + hs[0].shape, complex)
                   for l in self.collapse_ops)
        if len(hs) != len(ls) or not hs:
            raise InvalidChannel("one collapse-operator list per Hamiltonian required")
        d = hs[0].shape[0]
        for h, l in zip(hs, ls):
            if h.shape != (d, d) or l.shape[1:] != (d, d):
                raise InvalidChannel("inconsistent Lindblad dimensions")
            if np.abs(h - dag(h)).max() > 1e-10:
                raise InvalidChannel("Hamiltonian is not Hermitian")
        sec = tuple(np.asarray(p, dtype=complex) for p in self.sectors)
        for p in sec:
            if p.shape != (d, d) or np.abs(p @ p - p).max() > 1e-10 or np.abs(p - dag(p)).max() > 1e-10:
                raise InvalidChannel("sectors must be orthogonal projectors")
        object.__setattr__(self, "sectors", sec)
        object.__setattr__(self, "hamiltonians", hs)
        object.__setattr__(self, "collapse_ops", ls)
        object.__setattr__(self, "labels", tuple(self.labels) or tuple(f"omega{i}" for i in range(len(hs))))

    @property
    def dim(self) -> int:
        return self.hamiltonians[0].shape[0]

    @property
    def num_params(self) -> int:
        return len(self.hamiltonians)


def lindblad_maps(model: LindbladModel, x: int):
    """Linear pieces for the first-order gauge variables (h0, v, hh) of parameter x.

    Variable layout: [h0, Re v_1..J, Im v_1..J, hh coordinates (J*J), sector shifts].
    Returns (e, b0, m): D = sum_a y_a e[a] stacks v_j I + sum_k hh_jk L_k,
    beta = b0 + sum_a y_a m[a] with b0 = H_x.
    """
    h = model.hamiltonians[x]
    ls = model.collapse_ops[x]
    nj, d = len(ls), model.dim
    nv = 1 + 2 * nj + nj * nj + len(model.sectors)
    e = np.zeros((nv, nj * d, d), dtype=complex)
    m = np.zeros((nv, d, d), dtype=complex)
    eye = np.eye(d)
    m[0] = eye
    for j in range(nj):
        lj = ls[j]
        e[1 + j, j * d:(j + 1) * d] = eye
        e[1 + nj + j, j * d:(j + 1) * d] = 1j * eye
        m[1 + j] = lj + dag(lj)
        m[1 + nj + j] = 1j * (dag(lj) - lj)
    basis = hermitian_param_basis(nj) if nj else np.zeros((0, 0, 0))
    for a, b in enumerate(basis):
        idx = 1 + 2 * nj + a
        e[idx] = np.einsum("jk,kbc->jbc", b, ls).reshape(nj * d, d)
        m[idx] = np.einsum("jk,jab,kbc->ac", b, ls.conj().transpose(0, 2, 1), ls)
    for s, proj in enumerate(model.sectors):
        m[1 + 2 * nj + nj * nj + s] = proj
    return e, h.copy(), m


def hls_check(model: LindbladModel, x: int, tol: float = 1e-9) -> SpanCheck:
    """Is H_x in the real span of I, Hermitian/anti-Hermitian parts of L_j and L_j^dag L_k?"""
    _, b0, m = lindblad_maps(model, x)
    return _span_check(b0, m, tol, 0.0)


# --------------------------------------------------------------------------
# JSON round trip


def _enc(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _dec(obj) -> np.ndarray:
    a = np.asarray(obj, dtype=float)
    if a.shape[-1] != 2:
        raise InvalidChannel("complex entries must be encoded as [re, im]")
    return a[..., 0] + 1j * a[..., 1]


def channel_to_json(ch: ParamChannel) -> dict:
    out = {"dim_in": ch.dim_in, "dim_out": ch.dim_out, "params": list(ch.labels),
           "theta_star": ch.theta_star.tolist()}
    if ch.shared:
        out["kraus"] = _enc(ch.kraus[0])
    else:
        out["kraus_per_param"] = [_enc(k) for k in ch.kraus]
    out["dkraus"] = [_enc(d) for d in ch.dkraus]
    return out


def channel_from_json(obj: dict, tol: float = CPTP_TOL) -> ParamChannel:
    """Load a channel from its JSON form; CPTP is validated before returning."""
    try:
        params = obj["params"]
        dk = [_dec(d) for d in obj["dkraus"]]
        if "kraus" in obj:
            ch = ParamChannel.single(_dec(obj["kraus"]), dk, params, obj.get("theta_star"))
        else:
            ch = ParamChannel(tuple(_dec(k) for k in obj["kraus_per_param"]), tuple(dk), params,
                              obj.get("theta_star"))
    except KeyError as exc:
        raise InvalidChannel(f"channel JSON missing field {exc}") from None
    if (ch.dim_in, ch.dim_out) != (obj.get("dim_in", ch.dim_in), obj.get("dim_out", ch.dim_out)):
        raise InvalidChannel("declared dimensions disagree with Kraus shapes")
    rep = validate_cptp(ch, tol)
    if not rep.passed:
        raise InvalidChannel(f"channel is not trace preserving (residual {max(rep.residuals):.3e})")
    return ch


def load_channel(path) -> ParamChannel:
    with open(path) as fh:
        return channel_from_json(json.load(fh))


def save_channel(ch: ParamChannel, path) -> None:
    with open(path, "w") as fh:
        json.dump(channel_to_json(ch), fh)


def is_hermitian(a, tol=1e-8) -> bool:
    return np.abs(a - dag(a)).max() <= tol * max(1.0, operator_norm(a))
