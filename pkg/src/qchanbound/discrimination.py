"""State discrimination errors and query lower bounds for telling channels apart.

The speed limit turns an upper bound B(theta) on the total QFI of a family of
channels into a lower bound on the number of queries needed before the
outputs can be told apart:

    N >= p * target**2 / (int_0^theta* sqrt(B(theta)) dtheta)**2

with target = 1 - 2 eps (error probability eps) or delta (pairwise Bures
angle).  For Markovian oracles the same formula with the per-time bound gives
a lower bound on the total runtime.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import sdp
from .bounds import markovian_sql_bound
from .linalg import InvalidInput, hermitian_param_basis, real_embed_batch, trace_norm
from .states import check_density, trace_distance
from .zoo import grover_dephasing, grover_erasure


@dataclass(frozen=True)
class Ensemble:
    states: tuple
    priors: np.ndarray

    def __post_init__(self):
        states = tuple(check_density(s) for s in self.states)
        if len(states) < 2:
            raise InvalidInput("an ensemble needs at least two states")
        if len({s.shape for s in states}) != 1:
            raise InvalidInput("ensemble states have different dimensions")
        p = np.asarray(self.priors, dtype=float).reshape(-1)
        if p.shape != (len(states),):
            raise InvalidInput("one prior per state required")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise InvalidInput("priors must be nonnegative and sum to 1")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "priors", p)

    @classmethod
    def uniform(cls, states) -> "Ensemble":
        return cls(tuple(states), np.full(len(states), 1.0 / len(states)))

    @property
    def size(self) -> int:
        return len(self.states)


def helstrom_binary(r1, r2) -> float:
    """Minimal error for two equiprobable states."""
    return 0.5 * (1.0 - trace_distance(r1, r2))


def helstrom_multi(ens: Ensemble, gap_tol: float = 1e-10) -> float:
    """1 - max_POVM sum_x p_x Tr[rho_x Pi_x], solved as an SDP.

    The last element is eliminated through Pi_last = I - sum of the others, so
    the cone constraints are Pi_x >= 0 for every x including the last.
    """
    n = ens.states[0].shape[0]
    p = ens.size
    basis = hermitian_param_basis(n)
    nb = len(basis)
    m = nb * (p - 1)
    last = ens.priors[-1] * ens.states[-1]
    c = np.zeros(m)
    blocks = []
    for x in range(p - 1):
        wx = ens.priors[x] * ens.states[x]
        c[x * nb:(x + 1) * nb] = [-np.trace((wx - last) @ b).real for b in basis]
        blocks.append(sdp.LmiBlock(np.zeros((2 * n, 2 * n)), np.arange(x * nb, (x + 1) * nb),
                                   real_embed_batch(basis)))
    neg = -np.tile(basis, (p - 1, 1, 1))
    blocks.append(sdp.LmiBlock(real_embed_batch(np.eye(n)[None])[0], np.arange(m), real_embed_batch(neg)))
    sol = sdp.solve(sdp.SdpProblem(m, c, blocks), gap_tol=gap_tol)
    if sol.status != sdp.OPTIMAL:
        raise sdp.SolverError(f"POVM optimization ended with status {sol.status}", sol)
    success = np.trace(last).real - sol.primal_objective
    return float(min(1.0, max(0.0, 1.0 - success)))


def pairwise_error_lower_bound(ens: Ensemble) -> float:
    """1/2 (1 - (p-1)^-1 sum_{x<y} ||p_x rho_x - p_y rho_y||_1), never above the Helstrom error."""
    p = ens.size
    total = 0.0
    for x in range(p):
        for y in range(x + 1, p):
            total += trace_norm(ens.priors[x] * ens.states[x] - ens.priors[y] * ens.states[y])
    return 0.5 * (1.0 - total / (p - 1))


@dataclass(frozen=True)
class SpeedLimitQuery:
    num_channels: int
    sql_bound_curve: Callable[[float], float] | float
    theta_star: float
    error: float | None = None
    bures: float | None = None

    def __post_init__(self):
        if self.num_channels < 2:
            raise InvalidInput("need at least two channels")
        if not self.theta_star > 0:
            raise InvalidInput("theta_star must be positive")
        if (self.error is None) == (self.bures is None):
            raise InvalidInput("set exactly one of error or bures")
        if self.error is not None and self.error < 0:
            raise InvalidInput("error target must be nonnegative")
        if self.bures is not None and not 0 < self.bures <= math.pi / 2:
            raise InvalidInput("Bures target must lie in (0, pi/2]")


def path_length(curve, theta_star: float, rel_tol: float = 1e-9) -> float:
    """int_0^theta* sqrt(B(theta)) dtheta; constant curves are integrated exactly."""
    if not callable(curve):
        if curve < 0:
            raise InvalidInput("bound curve must be nonnegative")
        return math.sqrt(curve) * theta_star

    def root(t):
        v = curve(t)
        if v < 0:
            raise InvalidInput(f"bound curve is negative at theta={t}")
        return math.sqrt(v)

    val, _ = quad(root, 0.0, theta_star, epsrel=rel_tol, epsabs=0.0, limit=200)
    return val


def speed_limit_queries(q: SpeedLimitQuery) -> float:
    """Lower bound on the number of queries (the caller rounds up)."""
    if q.error is not None:
        if q.error >= 0.5:
            warnings.warn("error target >= 1/2 makes the speed limit trivial", stacklevel=2)
            return 0.0
        target = 1.0 - 2.0 * q.error
    else:
        target = q.bures
    length = path_length(q.sql_bound_curve, q.theta_star)
    if length == 0:
        return math.inf
    return q.num_channels * target ** 2 / length ** 2


def grover_rate_bound(noise: str, d: int, gamma: float) -> float:
    """Per-time total QFI bound for the d oracle Hamiltonians |x><x| (unit frequency)."""
    if noise == "dephasing":
        model = grover_dephasing(d, gamma)
    elif noise == "erasure":
        model = grover_erasure(d, gamma)
    else:
        raise InvalidInput(f"unknown Grover noise {noise!r}")
    return markovian_sql_bound(model).value


def grover_runtime_bound(noise: str, d, gamma: float, omega: float, delta: float) -> float:
    """Lower bound on T / d for pairwise Bures angle delta between all final states.

    ``d = math.inf`` uses the d-independent cap 4 / gamma on the per-time bound,
    which holds for both noise models and is approached as d grows.
    """
    if not (gamma > 0 and omega > 0):
        raise InvalidInput("gamma and omega must be positive")
    if not 0 < delta <= math.pi / 2:
        raise InvalidInput("delta must lie in (0, pi/2]")
    if noise not in ("dephasing", "erasure"):
        raise InvalidInput(f"unknown Grover noise {noise!r}")
    if d == math.inf:
        rate = 4.0 / gamma
        p = 2  # any p works: T/d scales out
    else:
        if int(d) != d or d < 2:
            raise InvalidInput("d must be an integer >= 2")
        p = int(d)
        rate = grover_rate_bound(noise, p, gamma)
    # queries of length tau with theta* = omega tau: N tau >= p delta^2 / (B_omega omega^2)
    runtime = speed_limit_queries(SpeedLimitQuery(p, rate, omega, bures=delta))
    return runtime / p
