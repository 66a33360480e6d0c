"""Channel QFI bounds built on the purification gauge h.

For each parameter x the gauge h_x acts on the Kraus index and defines

    D_x = dK_x - i h_x K_x,   alpha_x = D_x^dag D_x,   beta_x = D_x^dag K_x.

The single-use bound is 4 min_h ||sum_x q_x alpha_x||; the asymptotic (SQL)
bound adds beta_x = 0.  Both are solved as SDPs through the operator-norm
epigraph.  The default "split" program uses one small LMI per parameter,

    [[S_x, D_x^dag], [D_x, I]] >= 0,    t I - sum_x q_x S_x >= 0,

which is equivalent to the single stacked LMI [[t I, D^dag], [D, I]] >= 0 with
D the vertical stack of sqrt(q_x) D_x (available as ``formulation="stacked"``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .channels import (HeisenbergPossible, LindbladModel, ParamChannel, choi_matrix, gauge_maps,
                       hks_check, hls_check, lindblad_maps, _real_rows)
from .linalg import dag, herm_from_params, hermitian_param_basis, operator_norm, real_embed_batch

log = logging.getLogger(__name__)


class SolverFailure(RuntimeError):
    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


@dataclass
class BoundResult:
    value: float
    mode: str
    weights: np.ndarray
    gauge: list
    beta_residuals: list
    solver: dict = field(default_factory=dict)
    t: float = float("nan")

    def to_json(self) -> dict:
        def enc(h):
            if isinstance(h, dict):
                return {k: enc(v) for k, v in h.items()}
            h = np.asarray(h)
            if np.iscomplexobj(h):
                return np.stack([h.real, h.imag], axis=-1).tolist()
            return h.tolist()
        return {"bound": self.value, "mode": self.mode, "weights": list(map(float, self.weights)),
                "gauge": [enc(h) for h in self.gauge],
                "beta_residuals": list(map(float, self.beta_residuals)),
                "solver": {"status": self.solver.get("status"), "gap": self.solver.get("gap")}}


def _weights(weights, p):
    if weights is None:
        return np.ones(p)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (p,):
        raise ValueError(f"expected {p} weights, got {w.shape[0]}")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive and finite")
    return w


def zero_gauge(ch: ParamChannel) -> list:
    return [np.zeros((ch.rank(x), ch.rank(x)), complex) for x in range(ch.num_params)]


def build_alpha_beta(ch: ParamChannel, gauge, x: int):
    """alpha_x and beta_x for the Hermitian gauge matrix gauge[x]."""
    k, dk = ch.kraus[x], ch.dkraus[x]
    h = np.asarray(gauge[x], dtype=complex)
    if h.shape != (k.shape[0], k.shape[0]):
        raise ValueError(f"gauge for parameter {x} must be {k.shape[0]}x{k.shape[0]}, got {h.shape}")
    d = dk - 1j * np.tensordot(h, k, axes=1)
    alpha = np.einsum("jab,jac->bc", d.conj(), d)
    beta = np.einsum("jab,jac->bc", d.conj(), k)
    return alpha, beta


# --------------------------------------------------------------------------
# SDP assembly


def _herm_lmi(top_left_coeffs, d0, e, din, r):
    """Complex stacks for [[S, D^dag], [D, I]] with D = d0 + sum e_a y_a."""
    n = din + r
    f0 = np.zeros((n, n), complex)
    f0[din:, din:] = np.eye(r)
    f0[din:, :din] = d0
    f0[:din, din:] = dag(d0)
    ce = np.zeros((len(e), n, n), complex)
    ce[:, din:, :din] = e
    ce[:, :din, din:] = dag(e)
    cs = np.zeros((len(top_left_coeffs), n, n), complex)
    cs[:, :din, :din] = top_left_coeffs
    return f0, ce, cs


def _norm_sdp(d0s, es, weights, eqs, din, formulation="split", gap_tol=1e-9):
    """min t s.t. t >= ||sum_x q_x D_x^dag D_x|| over the affine D_x(y_x); returns (t, ys, solution)."""
    p = len(d0s)
    nys = [len(e) for e in es]
    blocks = []
    eq_rows, eq_rhs = [], []
    if formulation == "split":
        sb = hermitian_param_basis(din)
        ns = len(sb)
        off = [1 + sum(nys[:x]) + x * ns for x in range(p)]
        m = 1 + sum(nys) + p * ns
        tcoef = np.zeros((m, din, din), complex)
        tcoef[0] = np.eye(din)
        for x in range(p):
            r = d0s[x].shape[0]
            f0, ce, cs = _herm_lmi(sb, d0s[x], es[x], din, r)
            idx = np.arange(off[x], off[x] + nys[x] + ns)
            coeffs = np.concatenate([ce, cs])
            blocks.append(sdp.LmiBlock(sdp.real_embed(f0), idx, real_embed_batch(coeffs)))
            tcoef[off[x] + nys[x]: off[x] + nys[x] + ns] = -weights[x] * sb
        tidx = np.flatnonzero(np.abs(tcoef).reshape(m, -1).max(axis=1) > 0)
        blocks.append(sdp.LmiBlock(np.zeros((2 * din, 2 * din)), tidx, real_embed_batch(tcoef[tidx])))
    elif formulation == "stacked":
        off = [1 + sum(nys[:x]) for x in range(p)]
        m = 1 + sum(nys)
        sq = np.sqrt(weights)
        d0 = np.concatenate([sq[x] * d0s[x] for x in range(p)])
        rtot = d0.shape[0]
        e_all = np.zeros((m - 1, rtot, din), complex)
        row = 0
        for x in range(p):
            r = d0s[x].shape[0]
            e_all[off[x] - 1: off[x] - 1 + nys[x], row:row + r] = sq[x] * es[x]
            row += r
        f0, ce, cs = _herm_lmi(np.eye(din)[None], d0, e_all, din, rtot)
        coeffs = np.concatenate([cs, ce])
        blocks.append(sdp.LmiBlock(sdp.real_embed(f0), np.arange(m), real_embed_batch(coeffs)))
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    for x in range(p):
        if eqs[x] is None:
            continue
        a, rhs = eqs[x]
        full = np.zeros((len(a), m))
        full[:, off[x]:off[x] + nys[x]] = a
        eq_rows.append(full)
        eq_rhs.append(rhs)
    c = np.zeros(m)
    c[0] = 1.0
    prob = sdp.SdpProblem(m, c, blocks, np.concatenate(eq_rows) if eq_rows else None,
                          np.concatenate(eq_rhs) if eq_rhs else None)
    sol = sdp.solve(prob, gap_tol=gap_tol)
    if sol.status != sdp.OPTIMAL:
        raise SolverFailure(f"gauge SDP ended with status {sol.status}", sol)
    ys = [sol.y[off[x]:off[x] + nys[x]] for x in range(p)]
    return float(sol.y[0]), ys, sol


def require_hks(ch: ParamChannel, tol=1e-9):
    bad = []
    for x in range(ch.num_params):
        res = hks_check(ch, x, tol)
        if not res.satisfied:
            bad.append((ch.labels[x], res.residual))
    if bad:
        raise HeisenbergPossible([b[0] for b in bad], [b[1] for b in bad])


def _channel_bound(ch, weights, mode, formulation, gap_tol):
    w = _weights(weights, ch.num_params)
    if mode == "sql":
        require_hks(ch)
    maps = [gauge_maps(ch.kraus[x], ch.dkraus[x]) for x in range(ch.num_params)]
    d0s = [mp[0] for mp in maps]
    es = [mp[1] for mp in maps]
    eqs = [_real_rows(mp[2], mp[3]) if mode == "sql" else None for mp in maps]
    t, ys, sol = _norm_sdp(d0s, es, w, eqs, ch.dim_in, formulation, gap_tol)
    gauge = [herm_from_params(y, ch.rank(x)) for x, y in enumerate(ys)]
    abar = np.zeros((ch.dim_in, ch.dim_in), complex)
    betas = []
    for x in range(ch.num_params):
        a, b = build_alpha_beta(ch, gauge, x)
        abar += w[x] * a
        betas.append(float(np.abs(b).max()))
    value = 4 * operator_norm(abar)
    return BoundResult(value, mode, w, gauge, betas, sol.summary(), t)


def single_use_bound(ch: ParamChannel, weights=None, formulation="split", gap_tol=1e-9) -> BoundResult:
    """4 min_h ||sum_x q_x alpha_x||: total QFI of one use of the (extended) channels."""
    return _channel_bound(ch, weights, "single_use", formulation, gap_tol)


def sql_bound(ch: ParamChannel, weights=None, formulation="split", gap_tol=1e-9) -> BoundResult:
    """Asymptotic per-use bound: the same minimum restricted to beta_x = 0 for all x."""
    return _channel_bound(ch, weights, "sql", formulation, gap_tol)


def sum_of_singles(ch: ParamChannel, weights=None, mode="single_use") -> float:
    w = _weights(weights, ch.num_params)
    fn = single_use_bound if mode == "single_use" else sql_bound
    if mode not in ("single_use", "sql"):
        raise ValueError(f"unknown mode {mode!r}")
    return float(sum(w[x] * fn(ch.select([x])).value for x in range(ch.num_params)))


# --------------------------------------------------------------------------
# finite-N evaluations


def sequential_expression(alphas, betas, weights, n: int) -> float:
    w = np.asarray(weights, float)
    na = operator_norm(np.tensordot(w, alphas, axes=1))
    nb = operator_norm(np.tensordot(w, betas, axes=1))
    mb = max(operator_norm(b) for b in betas)
    return 4 * (n * na + n * (n - 1) * mb * (nb + 2 * np.sqrt(w.sum() * na)))


def parallel_expression(alphas, betas, weights, n: int) -> float:
    w = np.asarray(weights, float)
    na = operator_norm(np.tensordot(w, alphas, axes=1))
    nb2 = operator_norm(np.tensordot(w, [b @ b for b in betas], axes=1))
    return 4 * (n * na + n * (n - 1) * nb2)


def beta_square_flags(betas, tol=1e-8) -> list[bool]:
    """True where beta_x is neither Hermitian nor anti-Hermitian, so beta_x^2 is not Hermitian."""
    out = []
    for b in betas:
        s = max(1.0, operator_norm(b))
        herm = np.abs(b - dag(b)).max() <= tol * s
        anti = np.abs(b + dag(b)).max() <= tol * s
        out.append(not (herm or anti))
    return out


def default_gauge_candidates(ch: ParamChannel, weights=None) -> list:
    cands = [zero_gauge(ch), single_use_bound(ch, weights).gauge]
    try:
        cands.append(sql_bound(ch, weights).gauge)
    except HeisenbergPossible:
        pass
    return cands


def _eval_candidates(ch, weights, gauge_candidates, n, expr):
    if n < 1:
        raise ValueError("N must be at least 1")
    w = _weights(weights, ch.num_params)
    if gauge_candidates is None:
        gauge_candidates = default_gauge_candidates(ch, w)
    best = np.inf
    for g in gauge_candidates:
        ab = [build_alpha_beta(ch, g, x) for x in range(ch.num_params)]
        alphas = np.array([a for a, _ in ab])
        betas = np.array([b for _, b in ab])
        if expr is parallel_expression and any(beta_square_flags(betas)):
            log.warning("beta_x is neither Hermitian nor anti-Hermitian; beta^2 term taken literally")
        best = min(best, expr(alphas, betas, w, n))
    return float(best)


def finite_n_bound_eval(ch: ParamChannel, weights=None, gauge_candidates=None, n: int = 1) -> float:
    """Adaptive N-use bound minimized over a finite set of candidate gauges."""
    return _eval_candidates(ch, weights, gauge_candidates, n, sequential_expression)


def parallel_bound_eval(ch: ParamChannel, weights=None, gauge_candidates=None, n: int = 1) -> float:
    """Parallel N-use bound minimized over a finite set of candidate gauges."""
    return _eval_candidates(ch, weights, gauge_candidates, n, parallel_expression)


# --------------------------------------------------------------------------
# Markovian limit


def markovian_sql_bound(model: LindbladModel, weights=None, formulation="split",
                        gap_tol=1e-9) -> BoundResult:
    """Per-unit-time SQL bound for Hamiltonian parameters under Lindblad noise."""
    w = _weights(weights, model.num_params)
    bad = [(model.labels[x], r.residual) for x in range(model.num_params)
           if not (r := hls_check(model, x)).satisfied]
    if bad:
        raise HeisenbergPossible([b[0] for b in bad], [b[1] for b in bad])
    d0s, es, eqs = [], [], []
    for x in range(model.num_params):
        e, b0, m = lindblad_maps(model, x)
        d0s.append(np.zeros(e.shape[1:], complex))
        es.append(e)
        eqs.append(_real_rows(b0, m))
    t, ys, sol = _norm_sdp(d0s, es, w, eqs, model.dim, formulation, gap_tol)
    gauge, betas = [], []
    abar = np.zeros((model.dim, model.dim), complex)
    for x, y in enumerate(ys):
        e, b0, m = lindblad_maps(model, x)
        nj = len(model.collapse_ops[x])
        d = np.tensordot(y, e, axes=1)
        abar += w[x] * dag(d) @ d
        betas.append(float(np.abs(b0 + np.tensordot(y, m, axes=1)).max()))
        v = y[1:1 + nj] + 1j * y[1 + nj:1 + 2 * nj]
        gauge.append({"h0": float(y[0]), "v": v,
                      "hh": herm_from_params(y[1 + 2 * nj:1 + 2 * nj + nj * nj], nj),
                      "sector_shifts": y[1 + 2 * nj + nj * nj:]})
    return BoundResult(4 * operator_norm(abar), "markovian", w, gauge, betas, sol.summary(), t)


# --------------------------------------------------------------------------
# RLD and noiseless bounds


@dataclass
class RldResult:
    finite: bool
    value: float
    leak: float


def _partial_trace_output(m: np.ndarray, dout: int, din: int) -> np.ndarray:
    return np.einsum("aiaj->ij", m.reshape(dout, din, dout, din))


def rld_bound(ch: ParamChannel, weights=None, rank_tol=1e-10) -> RldResult:
    """||sum_x q_x Tr_out[dOmega_x Omega_x^+ dOmega_x]|| on the Choi matrix, or infinite.

    The trace runs over the output factor, leaving a dim_in x dim_in operator
    (the transpose of a K^dag K-type matrix).
    """
    w = _weights(weights, ch.num_params)
    total = np.zeros((ch.dim_in, ch.dim_in), complex)
    leak, scale = 0.0, 0.0
    for x in range(ch.num_params):
        omega, domega = choi_matrix(ch, x)
        lam, v = np.linalg.eigh(omega)
        keep = lam > rank_tol * np.trace(omega).real
        vs = v[:, keep]
        pinv = (vs / lam[keep]) @ dag(vs)
        perp = np.eye(len(omega)) - vs @ dag(vs)
        sq = domega @ domega
        leak += operator_norm(sq @ perp)
        scale += operator_norm(sq)
        total += w[x] * _partial_trace_output(domega @ pinv @ domega, ch.dim_out, ch.dim_in)
    finite = leak <= 1e-8 * max(scale, 1e-300)
    return RldResult(finite, operator_norm(total) if finite else float("inf"), leak)


def kura_ueda_bound(generators) -> float:
    """Noiseless total-QFI bound 4 ||sum_x G_x^2|| for a linear unitary encoding."""
    gs = [np.asarray(g, complex) for g in generators]
    for g in gs:
        if np.abs(g - dag(g)).max() > 1e-10:
            raise ValueError("generators must be Hermitian")
    return 4 * operator_norm(sum(g @ g for g in gs))
