"""Small dense SDP solver.

Problems are posed in inequality form::

    minimize    c @ y
    subject to  F0_b + sum_i y_i F_{b,i}  >= 0   for every block b
                A_eq @ y == b_eq

The solver is a primal-dual interior-point method with Nesterov-Todd scaling
and a Mehrotra predictor-corrector, started from an infeasible point.
Equality constraints are eliminated before the cone iterations, and
directions along which neither the objective nor any block moves are
dropped so the Schur complement stays nonsingular.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .linalg import real_embed, real_embed_batch

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max-iter"


class SolverError(RuntimeError):
    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


@dataclass
class LmiBlock:
    """Affine symmetric map y -> f0 + sum_k y[idx[k]] * coeffs[k]."""

    f0: np.ndarray
    idx: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=float)
        self.idx = np.asarray(self.idx, dtype=int)
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(len(self.idx), *self.f0.shape)
        n = self.f0.shape[0]
        if self.f0.shape != (n, n):
            raise ValueError("LMI block must be square")
        if len(np.unique(self.idx)) != len(self.idx):
            raise ValueError("duplicate variable index in LMI block")

    @property
    def dim(self) -> int:
        return self.f0.shape[0]

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.f0 + np.tensordot(y[self.idx], self.coeffs, axes=1)

    @classmethod
    def dense(cls, f0, coeffs, tol: float = 0.0) -> "LmiBlock":
        """Build from a full (num_vars, n, n) coefficient stack, keeping nonzero slices."""
        coeffs = np.asarray(coeffs, dtype=float)
        keep = np.flatnonzero(np.abs(coeffs).reshape(len(coeffs), -1).max(axis=1, initial=0) > tol)
        return cls(f0, keep, coeffs[keep])

    @classmethod
    def from_complex(cls, f0, idx, coeffs) -> "LmiBlock":
        """Hermitian LMI, stored through its real embedding."""
        coeffs = np.asarray(coeffs, dtype=complex)
        return cls(real_embed(f0), idx, real_embed_batch(coeffs) if len(coeffs) else
                   np.zeros((0, 2 * len(f0), 2 * len(f0))))


@dataclass
class SdpProblem:
    num_vars: int
    objective: np.ndarray
    blocks: list[LmiBlock]
    eq_rows: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise ValueError("objective length must equal num_vars")
        if self.eq_rows is None:
            self.eq_rows = np.zeros((0, self.num_vars))
            self.eq_rhs = np.zeros(0)
        self.eq_rows = np.atleast_2d(np.asarray(self.eq_rows, dtype=float))
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        if self.eq_rows.shape != (len(self.eq_rhs), self.num_vars):
            raise ValueError("equality rows inconsistent with num_vars / rhs")
        for b in self.blocks:
            if b.idx.size and (b.idx.max() >= self.num_vars or b.idx.min() < 0):
                raise ValueError("LMI block refers to an unknown variable")
            if not np.allclose(b.f0, b.f0.T) or not np.allclose(b.coeffs, np.swapaxes(b.coeffs, 1, 2)):
                raise ValueError("LMI block matrices must be symmetric")

    def min_eigenvalues(self, y: np.ndarray) -> list[float]:
        return [float(np.linalg.eigvalsh(b.evaluate(y))[0]) for b in self.blocks]

    def eq_residual(self, y: np.ndarray) -> float:
        if not len(self.eq_rhs):
            return 0.0
        return float(np.max(np.abs(self.eq_rows @ y - self.eq_rhs)))


@dataclass
class SdpSolution:
    status: str
    y: np.ndarray
    primal_objective: float
    dual_objective: float
    duality_gap: float
    max_eq_residual: float
    min_block_eigenvalue: float
    iterations: int
    duals: list[np.ndarray] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {"status": self.status, "gap": self.duality_gap,
                "primal_objective": self.primal_objective,
                "max_eq_residual": self.max_eq_residual,
                "min_block_eigenvalue": self.min_block_eigenvalue,
                "iterations": self.iterations}


# --------------------------------------------------------------------------
# presolve: equality elimination and removal of inert directions


class _Reduction:
    """y = y0 + T u with T stored column-sparse as a dense matrix."""

    def __init__(self, y0, t):
        self.y0 = y0
        self.t = t

    def lift(self, u):
        return self.y0 + self.t @ u


def _components(rows: np.ndarray, m: int) -> list[np.ndarray]:
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for r in rows:
        nz = np.flatnonzero(r)
        for j in nz[1:]:
            a, b = find(nz[0]), find(j)
            if a != b:
                parent[a] = b
    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def _eliminate_equalities(prob: SdpProblem, rank_tol: float = 1e-11):
    m = prob.num_vars
    a, b = prob.eq_rows, prob.eq_rhs
    y0 = np.zeros(m)
    cols = []
    if not len(b):
        return _Reduction(y0, np.eye(m)), 0.0
    worst = 0.0
    for comp in _components(a, m):
        rows = np.flatnonzero(np.abs(a[:, comp]).max(axis=1) > 0)
        if not len(rows):
            for i in comp:
                col = np.zeros(m)
                col[i] = 1
                cols.append(col)
            continue
        sub = a[np.ix_(rows, comp)]
        u, s, vt = np.linalg.svd(sub)
        rank = int(np.sum(s > rank_tol * max(1.0, s[0])))
        coef = (u[:, :rank].T @ b[rows]) / s[:rank]
        y0[comp] = vt[:rank].T @ coef
        worst = max(worst, float(np.max(np.abs(sub @ y0[comp] - b[rows]))))
        for v in vt[rank:]:
            col = np.zeros(m)
            col[comp] = v
            cols.append(col)
    t = np.array(cols).T if cols else np.zeros((m, 0))
    return _Reduction(y0, t), worst


def _reduce_blocks(prob: SdpProblem, red: _Reduction, keep_cols=None):
    t = red.t
    blocks = []
    for blk in prob.blocks:
        f0 = blk.f0 + np.tensordot(red.y0[blk.idx], blk.coeffs, axes=1)
        sub = t[blk.idx]
        used = np.flatnonzero(np.abs(sub).max(axis=0, initial=0) > 0) if sub.size else np.zeros(0, int)
        coeffs = np.tensordot(sub[:, used].T, blk.coeffs, axes=1) if len(used) else \
            np.zeros((0,) + blk.f0.shape)
        blocks.append(LmiBlock(f0, used, coeffs))
    c = t.T @ prob.objective
    return c, blocks


def _inert_directions(c, blocks, m, tol=1e-12):
    """Variables that can be dropped because some direction leaves everything fixed."""
    if m == 0:
        return np.zeros(0, int)
    g = np.outer(c, c)
    for blk in blocks:
        if len(blk.idx):
            flat = blk.coeffs.reshape(len(blk.idx), -1)
            g[np.ix_(blk.idx, blk.idx)] += flat @ flat.T
    w, v = np.linalg.eigh(g)
    null = v[:, w <= tol * max(1.0, w[-1])]
    if null.shape[1] == 0:
        return np.zeros(0, int)
    _, _, piv = sla.qr(null.T, pivoting=True, mode="economic")
    return np.sort(piv[: null.shape[1]])


# --------------------------------------------------------------------------
# interior point core


def _sym(a):
    return 0.5 * (a + a.T)


def _is_pd(a) -> bool:
    try:
        np.linalg.cholesky(a)
        return True
    except np.linalg.LinAlgError:
        return False


def _svd(a):
    # the divide-and-conquer driver occasionally fails to converge on benign input
    try:
        return np.linalg.svd(a)
    except np.linalg.LinAlgError:
        return sla.svd(a, lapack_driver="gesvd")


def _max_step(lam, dtil):
    """Largest alpha with diag(lam) + alpha * dtil PSD."""
    isq = 1.0 / np.sqrt(lam)
    m = -(isq[:, None] * dtil * isq[None, :])
    top = np.linalg.eigvalsh(_sym(m))[-1]
    return np.inf if top <= 0 else 1.0 / top


def _ipm(c, blocks, m, gap_tol, feas_tol, max_iter):
    nb = [b.dim for b in blocks]
    ntot = sum(nb)

    def astar(y):
        return [b.f0 * 0 + np.tensordot(y[b.idx], b.coeffs, axes=1) for b in blocks]

    def aop(zs):
        out = np.zeros(m)
        for b, z in zip(blocks, zs):
            if len(b.idx):
                out[b.idx] += b.coeffs.reshape(len(b.idx), -1) @ z.reshape(-1)
        return out

    y = np.zeros(m)
    s = []
    for b in blocks:
        f = _sym(b.f0)
        lo = np.linalg.eigvalsh(f)[0]
        s.append(f + (max(0.0, -lo) + 1.0) * np.eye(b.dim))
    z = [np.eye(n) for n in nb]
    cnorm = 1.0 + np.linalg.norm(c)
    fnorm = 1.0 + max((np.linalg.norm(b.f0) for b in blocks), default=0.0)

    status = MAX_ITER
    it = 0
    best = None
    for it in range(1, max_iter + 1):
        ay = astar(y)
        rp = [si - b.f0 - a for si, b, a in zip(s, blocks, ay)]
        rd = aop(z) - c
        pobj = float(c @ y)
        dobj = -float(sum(np.sum(b.f0 * zi) for b, zi in zip(blocks, z)))
        comp = float(sum(np.sum(si * zi) for si, zi in zip(s, z)))
        mu = comp / ntot
        pres = max((np.abs(r).max() for r in rp), default=0.0) / fnorm
        dres = (np.abs(rd).max() if m else 0.0) / cnorm
        gap = max(comp, abs(pobj - dobj))
        if best is None or (pres + dres + gap) < best[0]:
            best = (pres + dres + gap, y.copy(), [zi.copy() for zi in z], pobj, dobj, gap)
        log.debug("it %d pobj %.12g pres %.2e dres %.2e gap %.2e", it, pobj, pres, dres, gap)
        if pres <= feas_tol and dres <= feas_tol and gap <= gap_tol * (1 + abs(pobj)):
            status = OPTIMAL
            break
        # certificates of infeasibility / unboundedness
        f0z = -dobj
        if f0z < 0:
            zbar = aop(z) / -f0z
            if np.abs(zbar).max(initial=0) <= feas_tol and pres > feas_tol:
                status = INFEASIBLE
                break
        if pobj < 0 and m:
            ybar = y / -pobj
            lo = min(np.linalg.eigvalsh(_sym(a))[0] for a in astar(ybar))
            if lo >= -feas_tol and np.linalg.norm(ybar) < 1e-6 * np.linalg.norm(y) and dres > feas_tol:
                status = UNBOUNDED
                break

        # NT scaling per block
        rs, rinv, lams, ws = [], [], [], []
        try:
            for si, zi in zip(s, z):
                ls = np.linalg.cholesky(_sym(si))
                lz = np.linalg.cholesky(_sym(zi))
                u, lam, vt = _svd(lz.T @ ls)
                r = ls @ vt.T / np.sqrt(lam)
                ri = (u.T @ lz.T) / np.sqrt(lam)[:, None]
                rs.append(r)
                rinv.append(ri)
                lams.append(lam)
                ws.append(ri.T @ ri)
        except np.linalg.LinAlgError:
            log.debug("lost positive definiteness at iteration %d", it)
            break

        h = np.zeros((m, m))
        for b, w in zip(blocks, ws):
            k = len(b.idx)
            if k:
                p = np.matmul(np.matmul(w, b.coeffs), w)
                h[np.ix_(b.idx, b.idx)] += b.coeffs.reshape(k, -1) @ p.reshape(k, -1).T
        h = _sym(h)
        try:
            chol = sla.cho_factor(h)
            solve = lambda v: sla.cho_solve(chol, v)  # noqa: E731
        except np.linalg.LinAlgError:
            reg = 1e-14 * max(1.0, np.trace(h))
            hp = np.linalg.pinv(h + reg * np.eye(m), rcond=1e-15)
            solve = lambda v: hp @ v  # noqa: E731

        def direction(rc):
            qt = [2 * rci / (lam[:, None] + lam[None, :]) for rci, lam in zip(rc, lams)]
            zq = [ri.T @ q @ ri for ri, q in zip(rinv, qt)]
            rhs = aop([zqi + w @ rpi @ w for zqi, w, rpi in zip(zq, ws, rp)]) + rd
            dy = solve(rhs) if m else np.zeros(0)
            # iterative refinement against the unassembled Schur operator
            for _ in range(3):
                res = rhs - aop([w @ a @ w for w, a in zip(ws, astar(dy))])
                if np.abs(res).max(initial=0) <= 1e-15 * (1 + np.abs(rhs).max(initial=0)):
                    break
                dy = dy + solve(res)
            ady = astar(dy)
            ds = [a - rpi for a, rpi in zip(ady, rp)]
            dz = [zqi - w @ dsi @ w for zqi, w, dsi in zip(zq, ws, ds)]
            dst = [ri @ dsi @ ri.T for ri, dsi in zip(rinv, ds)]
            dzt = [r.T @ dzi @ r for r, dzi in zip(rs, dz)]
            return dy, ds, dz, dst, dzt

        def step_len(dst, dzt):
            a = np.inf
            for lam, d1, d2 in zip(lams, dst, dzt):
                a = min(a, _max_step(lam, _sym(d1)), _max_step(lam, _sym(d2)))
            return a

        rc_aff = [-np.diag(lam * lam) for lam in lams]
        _, ds_a, dz_a, dst_a, dzt_a = direction(rc_aff)
        a_aff = min(1.0, step_len(dst_a, dzt_a))
        mu_aff = sum(np.sum((si + a_aff * dsi) * (zi + a_aff * dzi))
                     for si, dsi, zi, dzi in zip(s, ds_a, z, dz_a)) / ntot
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
        rc = []
        for lam, d1, d2 in zip(lams, dst_a, dzt_a):
            cross = d1 @ d2
            rc.append(-np.diag(lam * lam) + sigma * mu * np.eye(len(lam)) - _sym(cross))
        dy, ds, dz, dst, dzt = direction(rc)
        alpha = min(1.0, 0.99 * step_len(dst, dzt))
        # round-off can still push an iterate out of the cone; back off until both factor
        for _ in range(30):
            s_new = [_sym(si + alpha * dsi) for si, dsi in zip(s, ds)]
            z_new = [_sym(zi + alpha * dzi) for zi, dzi in zip(z, dz)]
            if all(_is_pd(a) for a in s_new) and all(_is_pd(a) for a in z_new):
                break
            alpha *= 0.5
        else:
            log.debug("no positive definite step at iteration %d", it)
            break
        y = y + alpha * dy
        s, z = s_new, z_new
        if alpha < 1e-12:
            log.debug("step length collapsed at iteration %d", it)
            break
    if status == MAX_ITER and best is not None:
        _, y, z, pobj, dobj, gap = best
    return status, y, z, pobj, dobj, gap, it


def solve(problem: SdpProblem, gap_tol: float = 1e-9, feas_tol: float = 1e-9,
          max_iter: int = 200) -> SdpSolution:
    """Solve ``problem``; the status field reports optimal/infeasible/unbounded/max-iter."""
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    m0 = problem.num_vars
    red, eq_res = _eliminate_equalities(problem)
    if eq_res > 1e-8 * (1 + np.abs(problem.eq_rhs).max(initial=0)):
        return SdpSolution(INFEASIBLE, red.y0, np.nan, np.nan, np.inf, eq_res, np.nan, 0)
    c, blocks = _reduce_blocks(problem, red)
    m = red.t.shape[1]
    drop = _inert_directions(c, blocks, m)
    if len(drop):
        keep = np.setdiff1d(np.arange(m), drop)
        red = _Reduction(red.y0, red.t[:, keep])
        c, blocks = _reduce_blocks(problem, red)
        m = len(keep)

    const = [b for b in blocks if not len(b.idx)]
    for b in const:
        if np.linalg.eigvalsh(b.f0)[0] < -feas_tol:
            return SdpSolution(INFEASIBLE, red.y0, np.nan, np.nan, np.inf, eq_res, np.nan, 0)
    active = [b for b in blocks if len(b.idx)]
    const_obj = float(problem.objective @ red.y0)

    if not active:
        if m and np.abs(c).max() > 0:
            return SdpSolution(UNBOUNDED, red.y0, -np.inf, np.nan, np.inf, eq_res, np.nan, 0)
        y = red.y0
        mins = problem.min_eigenvalues(y)
        return SdpSolution(OPTIMAL, y, const_obj, const_obj, 0.0, problem.eq_residual(y),
                           min(mins, default=np.inf), 0)

    status, u, z, pobj, dobj, gap, it = _ipm(c, active, m, gap_tol, feas_tol, max_iter)
    y = red.lift(u)
    mins = problem.min_eigenvalues(y)
    sol = SdpSolution(status, y, pobj + const_obj, dobj + const_obj, gap, problem.eq_residual(y),
                      min(mins, default=np.inf), it, z)
    if status == OPTIMAL and (sol.min_block_eigenvalue < -1e-8 or sol.max_eq_residual > 1e-8):
        log.warning("optimal iterate failed re-verification: min eig %.2e, eq residual %.2e",
                    sol.min_block_eigenvalue, sol.max_eq_residual)
        sol.status = MAX_ITER
    assert len(y) == m0
    return sol
