"""Named channel families with analytic derivatives.

Every family is a function theta -> Kraus stack plus the analytic derivatives at
theta*.  Kraus ordering follows the displayed constructions: the no-jump
operator first, then jump/loss operators in basis order.

Unitary-encoded families put the noise after the encoding, K'_j = K_j U_theta
with U_theta = exp(-i sum_x theta_x G_x), evaluated at theta = 0 unless the
generators commute.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .channels import InvalidConfig, LindbladModel, ParamChannel, validate_cptp
from .linalg import random_unitary

ZOO_NAMES = ("erasure_tomography", "lossy_multiphase", "gad", "phase_loss", "phase_dephasing",
             "qudit_dephasing_unitary", "unitary_family")


def _check_eta(eta, name="eta"):
    if not 0 < eta < 1:
        raise InvalidConfig(f"{name} must lie in (0, 1), got {eta}")


def u_d_generators(d: int, kinds=("diag", "real", "imag")):
    """Generators |j><j|, (|j><k| + |k><j|)/2 and i(|j><k| - |k><j|)/2 (j < k)."""
    gens, labels = [], []
    for kind in kinds:
        if kind == "diag":
            for j in range(d):
                g = np.zeros((d, d), complex)
                g[j, j] = 1
                gens.append(g)
                labels.append(f"diag{j}")
        elif kind in ("real", "imag"):
            for j in range(d):
                for k in range(j + 1, d):
                    g = np.zeros((d, d), complex)
                    if kind == "real":
                        g[j, k] = g[k, j] = 0.5
                    else:
                        g[j, k], g[k, j] = 0.5j, -0.5j
                    gens.append(g)
                    labels.append(f"{kind}{j}{k}")
        else:
            raise InvalidConfig(f"unknown generator kind {kind!r}")
    return gens, labels


def erasure_kraus(d: int, eta: float) -> np.ndarray:
    """No-loss operator sqrt(eta) embedding, then sqrt(1-eta)|e><i| for each mode i."""
    k = np.zeros((d + 1, d + 1, d), complex)
    k[0, :d, :] = np.sqrt(eta) * np.eye(d)
    for i in range(d):
        k[i + 1, d, i] = np.sqrt(1 - eta)
    return k


def qudit_dephasing_kraus(d: int, eta: float) -> np.ndarray:
    """Non-minimal set sqrt(eta) I, sqrt(1-eta)|k><k|."""
    k = np.zeros((d + 1, d, d), complex)
    k[0] = np.sqrt(eta) * np.eye(d)
    for j in range(d):
        k[j + 1, j, j] = np.sqrt(1 - eta)
    return k


@dataclass(frozen=True)
class Family:
    """theta -> Kraus stack per parameter; ``build`` attaches analytic derivatives."""

    kraus_at: Callable
    dkraus_at: Callable
    labels: tuple
    theta_star: np.ndarray

    def build(self) -> ParamChannel:
        k = self.kraus_at(self.theta_star)
        dk = self.dkraus_at(self.theta_star)
        return ParamChannel.single(k, dk, self.labels, self.theta_star)


def unitary_encoded(noise: np.ndarray, gens, labels, theta_star=None) -> Family:
    gens = [np.asarray(g, complex) for g in gens]
    p = len(gens)
    theta0 = np.zeros(p) if theta_star is None else np.asarray(theta_star, float)
    commuting = all(np.allclose(a @ b, b @ a) for a in gens for b in gens)
    if np.any(theta0 != 0) and not commuting:
        raise InvalidConfig("non-commuting generators are only supported at theta* = 0")

    def unitary(theta):
        return sla.expm(-1j * np.tensordot(theta, gens, axes=1))

    def kraus_at(theta):
        return noise @ unitary(np.asarray(theta, float))

    def dkraus_at(theta):
        k = kraus_at(theta)
        # exact for commuting generators, and at theta = 0 in general
        return [-1j * k @ g for g in gens]

    return Family(kraus_at, dkraus_at, tuple(labels), theta0)


def _gad_family(nu, gamma) -> Family:
    def kraus_at(th):
        n, g = th
        a, b = np.sqrt(1 - n), np.sqrt(n)
        return np.array([a * np.diag([1, np.sqrt(1 - g)]),
                         a * np.sqrt(g) * np.array([[0, 1], [0, 0]]),
                         b * np.diag([np.sqrt(1 - g), 1]),
                         b * np.sqrt(g) * np.array([[0, 0], [1, 0]])], dtype=complex)

    def dkraus_at(th):
        n, g = th
        a, b = np.sqrt(1 - n), np.sqrt(n)
        sg, s1g = np.sqrt(g), np.sqrt(1 - g)
        up = np.array([[0, 1], [0, 0]])
        lo = up.T
        dnu = np.array([-np.diag([1, s1g]) / (2 * a), -sg * up / (2 * a),
                        np.diag([s1g, 1]) / (2 * b), sg * lo / (2 * b)], dtype=complex)
        dga = np.array([a * np.diag([0, -1 / (2 * s1g)]), a * up / (2 * sg),
                        b * np.diag([-1 / (2 * s1g), 0]), b * lo / (2 * sg)], dtype=complex)
        return [dnu, dga]

    return Family(kraus_at, dkraus_at, ("nu", "gamma"), np.array([nu, gamma], float))


def _phase_loss_family(eta, phi) -> Family:
    def kraus_at(th):
        ph, et = th
        k = np.zeros((2, 3, 2), complex)
        k[0, 0, 0] = np.sqrt(et) * np.exp(-1j * ph)
        k[0, 1, 1] = 1
        k[1, 2, 0] = np.sqrt(1 - et)
        return k

    def dkraus_at(th):
        ph, et = th
        dph = np.zeros((2, 3, 2), complex)
        dph[0, 0, 0] = -1j * np.sqrt(et) * np.exp(-1j * ph)
        det = np.zeros((2, 3, 2), complex)
        det[0, 0, 0] = np.exp(-1j * ph) / (2 * np.sqrt(et))
        det[1, 2, 0] = -1 / (2 * np.sqrt(1 - et))
        return [dph, det]

    return Family(kraus_at, dkraus_at, ("phi", "eta"), np.array([phi, eta], float))


def _phase_dephasing_family(eta, phi) -> Family:
    def kraus_at(th):
        ph, et = th
        e = np.exp(1j * ph)
        return np.array([np.sqrt((1 + et) / 2) * np.diag([e, 1]),
                         np.sqrt((1 - et) / 2) * np.diag([e, -1])], dtype=complex)

    def dkraus_at(th):
        ph, et = th
        e = np.exp(1j * ph)
        dph = np.array([np.sqrt((1 + et) / 2) * np.diag([1j * e, 0]),
                        np.sqrt((1 - et) / 2) * np.diag([1j * e, 0])], dtype=complex)
        det = np.array([np.diag([e, 1]) / (2 * np.sqrt(2 * (1 + et))),
                        -np.diag([e, -1]) / (2 * np.sqrt(2 * (1 - et)))], dtype=complex)
        return [dph, det]

    return Family(kraus_at, dkraus_at, ("phi", "eta"), np.array([phi, eta], float))


def zoo_family(name: str, **params) -> Family:
    """Differentiable family behind :func:`zoo_build`."""
    if name == "erasure_tomography":
        d, eta = int(params.get("d", 2)), float(params.get("eta", 0.5))
        _check_eta(eta)
        kinds = params.get("generators", ("diag", "real", "imag"))
        if isinstance(kinds, str):
            kinds = tuple(s for s in kinds.replace(",", " ").split() if s)
        gens, labels = u_d_generators(d, kinds)
        return unitary_encoded(erasure_kraus(d, eta), gens, labels, params.get("theta_star"))
    if name == "lossy_multiphase":
        p, eta = int(params.get("p", 2)), float(params.get("eta", 0.5))
        _check_eta(eta)
        extra = int(params.get("extra_ref", 0))
        if p < 1 or extra < 0:
            raise InvalidConfig("lossy_multiphase needs p >= 1 and extra_ref >= 0")
        d = p + 1 + extra
        gens, _ = u_d_generators(d, ("diag",))
        labels = [f"phase{j}" for j in range(1, p + 1)]
        return unitary_encoded(erasure_kraus(d, eta), gens[1:p + 1], labels, params.get("theta_star"))
    if name == "gad":
        nu, gamma = float(params.get("nu", 0.25)), float(params.get("gamma", 0.5))
        _check_eta(nu, "nu")
        _check_eta(gamma, "gamma")
        return _gad_family(nu, gamma)
    if name == "phase_loss":
        eta = float(params.get("eta", 0.5))
        _check_eta(eta)
        return _phase_loss_family(eta, float(params.get("phi", 0.0)))
    if name == "phase_dephasing":
        eta = float(params.get("eta", 0.5))
        _check_eta(eta)
        return _phase_dephasing_family(eta, float(params.get("phi", 0.0)))
    if name == "qudit_dephasing_unitary":
        d, eta = int(params.get("d", 2)), float(params.get("eta", 0.5))
        _check_eta(eta)
        gens, labels = u_d_generators(d, ("diag",))
        return unitary_encoded(qudit_dephasing_kraus(d, eta), gens, labels, params.get("theta_star"))
    if name == "unitary_family":
        d = int(params.get("d", 2))
        if "generators_list" in params:
            gens = [np.asarray(g, complex) for g in params["generators_list"]]
            labels = [f"g{i}" for i in range(len(gens))]
        else:
            kinds = params.get("generators", ("diag", "real", "imag"))
            if isinstance(kinds, str):
                kinds = tuple(s for s in kinds.replace(",", " ").split() if s)
            gens, labels = u_d_generators(d, kinds)
        d = gens[0].shape[0]
        return unitary_encoded(np.eye(d, dtype=complex)[None], gens, labels, params.get("theta_star"))
    raise InvalidConfig(f"unknown channel family {name!r}; known: {', '.join(ZOO_NAMES)}")


def zoo_build(name: str, **params) -> ParamChannel:
    """Validated channel from the named family at its evaluation point."""
    ch = zoo_family(name, **params).build()
    rep = validate_cptp(ch)
    if not rep.passed:
        raise InvalidConfig(f"{name} failed CPTP validation: {rep.residuals}")
    return ch


def finite_diff_check(ch: ParamChannel, builder: Callable, step: float = 1e-5) -> float:
    """Max entrywise gap between central differences of ``builder(theta)`` and ch.dkraus."""
    if not step > 0:
        raise InvalidConfig("finite-difference step must be positive")
    worst = 0.0
    for x in range(ch.num_params):
        e = np.zeros(ch.num_params)
        e[x] = step
        fd = (np.asarray(builder(ch.theta_star + e)) - np.asarray(builder(ch.theta_star - e))) / (2 * step)
        worst = max(worst, float(np.abs(fd - ch.dkraus[x]).max()))
    return worst


def random_isometry_channel(rng: np.random.Generator, dim_in=2, dim_out=None, rank=2,
                            num_params=2) -> ParamChannel:
    """Random smooth family V(theta) = exp(-i sum theta_x A_x) V0 with exact derivatives at 0.

    V0 is a random isometry C^dim_in -> C^dim_out (x) C^rank; the Kraus operators
    are its blocks along the environment factor.
    """
    dim_out = dim_in if dim_out is None else dim_out
    big = dim_out * rank
    if big < dim_in:
        raise InvalidConfig("environment too small for an isometry")
    v0 = random_unitary(big, rng)[:, :dim_in]
    gens = []
    for _ in range(num_params):
        z = rng.standard_normal((big, big)) + 1j * rng.standard_normal((big, big))
        gens.append((z + z.conj().T) / 4)

    def blocks(v):
        return v.reshape(dim_out, rank, dim_in).transpose(1, 0, 2)

    k = blocks(v0)
    dk = [blocks(-1j * a @ v0) for a in gens]
    return ParamChannel.single(k, dk, tuple(f"theta{i}" for i in range(num_params)))


def grover_dephasing(d: int, gamma: float = 1.0) -> LindbladModel:
    """d oracle Hamiltonians |x><x| under uniform dephasing L_k = sqrt(gamma)|k><k|."""
    ls = np.zeros((d, d, d), complex)
    for k in range(d):
        ls[k, k, k] = np.sqrt(gamma)
    hs = []
    for x in range(d):
        h = np.zeros((d, d), complex)
        h[x, x] = 1
        hs.append(h)
    return LindbladModel(tuple(hs), tuple(ls for _ in range(d)))


def grover_erasure(d: int, gamma: float = 1.0, superselect: bool = True) -> LindbladModel:
    """Oracle Hamiltonians on d levels plus an erasure flag level, L_i = sqrt(gamma)|e><i|.

    With ``superselect`` the flag and the data levels are separate sectors, so the
    flag cannot serve as a phase reference (as for a lost particle).
    """
    ls = np.zeros((d, d + 1, d + 1), complex)
    for i in range(d):
        ls[i, d, i] = np.sqrt(gamma)
    hs = []
    for x in range(d):
        h = np.zeros((d + 1, d + 1), complex)
        h[x, x] = 1
        hs.append(h)
    sectors = ()
    if superselect:
        flag = np.zeros((d + 1, d + 1), complex)
        flag[d, d] = 1
        sectors = (np.eye(d + 1) - flag, flag)
    return LindbladModel(tuple(hs), tuple(ls for _ in range(d)), sectors=sectors)


def qubit_dephasing_lindblad(gamma: float = 1.0) -> LindbladModel:
    sz = np.diag([1.0, -1.0]).astype(complex)
    return LindbladModel((sz / 2,), ((np.sqrt(gamma / 2) * sz)[None],))
