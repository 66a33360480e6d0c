import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from qchanbound.bounds import single_use_bound
from qchanbound.linalg import InvalidInput, InvalidState, random_density, random_hermitian, sylvester_sld
from qchanbound.states import (StateModel, bures_angle, extended_output, fidelity, probe_oracle_max_total_qfi,
                               qfi_diagonal, qfi_matrix_purification, qfi_matrix_sld, total_qfi_of_probe,
                               trace_distance)
from qchanbound.zoo import random_isometry_channel, zoo_build, zoo_family
from oracles import eig_trace_norm, extended_output_direct, fd_qfi, root_fidelity

SX = np.array([[0, 1], [1, 0]], complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
seeds = st.integers(0, 2**32 - 1)


def traceless(h):
    return h - np.trace(h) / len(h) * np.eye(len(h))


def random_model(rng, n, p):
    rho = random_density(n, rng)
    return StateModel(rho, tuple(traceless(random_hermitian(n, rng)) * 0.3 for _ in range(p)))


def psd_min(a):
    return np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0]


class TestSld:
    def test_plus_state_phase(self):
        plus = np.full((2, 2), 0.5, complex)
        drho = -1j * (SZ / 2 @ plus - plus @ SZ / 2)
        f, _ = qfi_matrix_sld(StateModel(plus, (drho,)))
        assert f[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_maximally_mixed(self):
        d = np.array([[0.1, 0], [0, -0.1]], complex)
        f, _ = qfi_matrix_sld(StateModel(np.eye(2) / 2, (d,)))
        assert f[0, 0] == pytest.approx(2 * np.trace(d @ d).real, abs=1e-14)
        assert np.allclose(sylvester_sld(np.eye(2) / 2, d), 2 * d)

    @pytest.mark.parametrize("eta", [0.3, 0.7])
    def test_dephased_plus_state(self, eta):
        ch = zoo_build("phase_dephasing", eta=eta)
        psi = np.array([1, 1], complex) / np.sqrt(2)
        rho = sum(k @ np.outer(psi, psi.conj()) @ k.conj().T for k in ch.kraus[0])
        t = sum(dk @ np.outer(psi, psi.conj()) @ k.conj().T for k, dk in zip(ch.kraus[0], ch.dkraus[0]))
        f, _ = qfi_matrix_sld(StateModel(rho, (t + t.conj().T,)))
        assert f[0, 0] == pytest.approx(eta**2, rel=1e-10)

    def test_sld_equation(self, rng):
        rho = random_density(3, rng)
        d = traceless(random_hermitian(3, rng))
        ell = sylvester_sld(rho, d)
        assert np.allclose(0.5 * (ell @ rho + rho @ ell), d, atol=1e-12)

    def test_matches_fidelity_finite_difference(self, rng):
        rho0 = random_density(3, rng)
        g = random_hermitian(3, rng)

        def state_at(t):
            u = sla.expm(-1j * t * g)
            return u @ rho0 @ u.conj().T

        drho = -1j * (g @ rho0 - rho0 @ g)
        f, _ = qfi_matrix_sld(StateModel(rho0, (drho,)))
        assert f[0, 0] == pytest.approx(fd_qfi(state_at, 1e-4), rel=1e-5)

    def test_diagonal_helper_agrees(self, rng):
        m = random_model(rng, 3, 3)
        f, _ = qfi_matrix_sld(m)
        assert np.allclose(np.diag(f), qfi_diagonal(m.rho, m.drho), rtol=1e-10)

    def test_invalid_state(self):
        with pytest.raises(InvalidState):
            StateModel(np.diag([1.2, -0.2]).astype(complex), (np.zeros((2, 2)),))
        with pytest.raises(InvalidState):
            StateModel(np.eye(2) / 2, (np.eye(2),))


class TestPurification:
    def test_sld_purification_equals_sld(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 4))
            m = random_model(rng, n, 3)
            psi = sla.sqrtm(m.rho).reshape(-1)
            jac = np.stack([0.5 * np.kron(sylvester_sld(m.rho, d), np.eye(n)) @ psi for d in m.drho], axis=1)
            f, _ = qfi_matrix_sld(m)
            assert np.abs(qfi_matrix_purification(jac, psi) - f).max() < 1e-10

    def test_zero_jacobian(self):
        psi = np.array([1, 0, 0, 0], complex)
        assert np.all(qfi_matrix_purification(np.zeros((4, 2)), psi) == 0)

    def test_unnormalized_rejected(self):
        with pytest.raises(InvalidInput):
            qfi_matrix_purification(np.zeros((2, 1)), np.array([1.0, 1.0]))

    @settings(max_examples=50)
    @given(seeds)
    def test_random_purifications_dominate(self, seed):
        rng = np.random.default_rng(seed)
        n, p = int(rng.integers(2, 4)), int(rng.integers(1, 4))
        m = random_model(rng, n, p)
        f, _ = qfi_matrix_sld(m)
        # any purification (with any ancilla unitary drift) reproduces the same state family
        u = sla.sqrtm(m.rho) @ np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))[0]
        psi = u.reshape(-1)
        cols = []
        for d in m.drho:
            ell = sylvester_sld(m.rho, d)
            anc = random_hermitian(n, rng)
            cols.append(0.5 * np.kron(ell, np.eye(n)) @ psi - 1j * np.kron(np.eye(n), anc) @ psi)
        fp = qfi_matrix_purification(np.stack(cols, axis=1), psi)
        assert psd_min(fp - f) >= -1e-9


class TestDistances:
    def test_identical_and_orthogonal(self, rng):
        r = random_density(3, rng)
        assert fidelity(r, r) == pytest.approx(1.0, abs=1e-7)
        assert trace_distance(r, r) == pytest.approx(0.0, abs=1e-12)
        assert bures_angle(r, r) == pytest.approx(0.0, abs=1e-3)
        a, b = np.diag([1.0, 0]).astype(complex), np.diag([0, 1.0]).astype(complex)
        assert fidelity(a, b) == 0 and trace_distance(a, b) == 1
        assert bures_angle(a, b) == pytest.approx(math.pi / 2)

    def test_qubit_closed_form(self):
        a, b = np.eye(2) / 2, np.diag([0.75, 0.25])
        assert trace_distance(a, b) == pytest.approx(0.25, abs=1e-14)
        assert fidelity(a, b) == pytest.approx((math.sqrt(3) + 1) / (2 * math.sqrt(2)), abs=1e-14)

    @settings(max_examples=200)
    @given(seeds)
    def test_fuchs_van_de_graaf(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        r1 = random_density(n, rng, int(rng.integers(1, n + 1)))
        r2 = random_density(n, rng, int(rng.integers(1, n + 1)))
        f, t = fidelity(r1, r2), trace_distance(r1, r2)
        assert 1 - f <= t + 1e-10 and t <= math.sqrt(max(0.0, 1 - f * f)) + 1e-10
        assert f == pytest.approx(root_fidelity(r1, r2), abs=1e-6)
        assert t == pytest.approx(0.5 * eig_trace_norm(r1 - r2), abs=1e-12)

    @settings(max_examples=100)
    @given(seeds)
    def test_bures_triangle(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_density(3, rng) for _ in range(3))
        assert bures_angle(a, c) <= bures_angle(a, b) + bures_angle(b, c) + 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInput):
            fidelity(np.eye(2) / 2, np.eye(3) / 3)

    @pytest.mark.parametrize("theta", [0.1, 0.5, 1.0, 2.0, 3.0])
    def test_geodesic_bound(self, theta, rng):
        rho0 = random_density(2, rng)
        g = SX / 2

        def state_at(t):
            u = sla.expm(-1j * t * g)
            return u @ rho0 @ u.conj().T

        ts = np.linspace(0, theta, 201)
        roots = []
        for t in ts:
            r = state_at(t)
            f, _ = qfi_matrix_sld(StateModel(r, (-1j * (g @ r - r @ g),)))
            roots.append(math.sqrt(f[0, 0]))
        length = 0.5 * np.trapezoid(roots, ts)
        assert bures_angle(rho0, state_at(theta)) <= length + 1e-9


class TestMonotonicity:
    @settings(max_examples=50)
    @given(seeds)
    def test_fixed_channel_contracts(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, 2, 2)
        ks = random_isometry_channel(rng, dim_in=2, dim_out=3, rank=2).kraus[0]
        out = StateModel(sum(k @ m.rho @ k.conj().T for k in ks),
                         tuple(sum(k @ d @ k.conj().T for k in ks) for d in m.drho))
        f_in, _ = qfi_matrix_sld(m)
        f_out, _ = qfi_matrix_sld(out)
        assert psd_min(f_in - f_out) >= -1e-9

    def test_partial_trace_contracts(self, rng):
        m = random_model(rng, 4, 2)
        pt = lambda a: np.einsum("ijkj->ik", a.reshape(2, 2, 2, 2))
        f_in, _ = qfi_matrix_sld(m)
        f_out, _ = qfi_matrix_sld(StateModel(pt(m.rho), tuple(pt(d) for d in m.drho)))
        assert psd_min(f_in - f_out) >= -1e-9


class TestExtendedOutput:
    def test_matches_direct(self, rng):
        fam = zoo_family("gad")
        ch = fam.build()
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi /= np.linalg.norm(psi)
        rho, drho = extended_output(ch, psi, 0)
        assert np.allclose(rho, extended_output_direct(ch.kraus[0], psi, 2), atol=1e-14)
        step = 1e-6
        e = np.array([step, 0])
        fd = (extended_output_direct(fam.kraus_at(ch.theta_star + e), psi, 2)
              - extended_output_direct(fam.kraus_at(ch.theta_star - e), psi, 2)) / (2 * step)
        assert np.allclose(drho, fd, atol=1e-8)

    def test_probe_qfi_vs_fidelity(self, rng):
        fam = zoo_family("phase_loss", eta=0.6)
        ch = fam.build()
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi /= np.linalg.norm(psi)
        for x in range(2):
            e = np.eye(2)[x]
            oracle = fd_qfi(lambda t: extended_output_direct(fam.kraus_at(ch.theta_star + t * e), psi, 2), 1e-4)
            w = np.eye(2)[x]
            assert total_qfi_of_probe(ch, psi, w) == pytest.approx(oracle, rel=1e-5)


class TestOracle:
    @pytest.mark.parametrize("eta", [0.3, 0.7])
    def test_phase_dephasing(self, eta):
        res = probe_oracle_max_total_qfi(zoo_build("phase_dephasing", eta=eta), restarts=4)
        assert res.value == pytest.approx(eta**2 + 1 / (1 - eta**2), abs=1e-4)

    def test_unitary(self):
        ch = zoo_build("unitary_family", generators_list=[SZ / 2])
        assert probe_oracle_max_total_qfi(ch, restarts=4).value == pytest.approx(1.0, abs=1e-6)

    def test_gad_two_qubit_family(self):
        ch = zoo_build("gad", nu=0.25, gamma=0.5)
        best = 0.0
        for a in np.linspace(0.0, 1.0, 401):
            psi = np.zeros(4, complex)
            psi[0], psi[3] = math.sqrt(a), math.sqrt(1 - a)
            best = max(best, total_qfi_of_probe(ch, psi, np.ones(2)))
        assert abs(best - 3.84) <= 2e-2

    @pytest.mark.parametrize("seed", range(3))
    def test_never_exceeds_bound(self, seed):
        ch = random_isometry_channel(np.random.default_rng(seed), dim_in=2, dim_out=2, rank=2)
        assert probe_oracle_max_total_qfi(ch, restarts=4, seed=seed).value <= single_use_bound(ch).value + 1e-6

    def test_deterministic(self):
        ch = zoo_build("gad")
        a = probe_oracle_max_total_qfi(ch, restarts=2, seed=5)
        b = probe_oracle_max_total_qfi(ch, restarts=2, seed=5)
        assert a.value == b.value
