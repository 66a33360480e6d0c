import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchanbound.bounds import (build_alpha_beta, finite_n_bound_eval, kura_ueda_bound, markovian_sql_bound,
                               parallel_bound_eval, rld_bound, single_use_bound, sql_bound, sum_of_singles,
                               zero_gauge)
from qchanbound.channels import HeisenbergPossible, ParamChannel
from qchanbound.linalg import operator_norm, random_unitary
from qchanbound.zoo import (grover_dephasing, grover_erasure, qubit_dephasing_lindblad, random_isometry_channel,
                            u_d_generators, zoo_build)
from oracles import cvx_channel_bound, erasure_sql_total, phase_dephasing_forms, phase_loss_forms

SZ = np.diag([1.0, -1.0]).astype(complex)
seeds = st.integers(0, 2**32 - 1)


def unitary_sz():
    return zoo_build("unitary_family", generators_list=[SZ / 2])


def hks_zoo():
    yield "gad", {"nu": 0.25, "gamma": 0.5}
    yield "gad", {"nu": 0.1, "gamma": 0.8}
    for eta in (0.2, 0.5, 0.8):
        yield "phase_loss", {"eta": eta}
        yield "phase_dephasing", {"eta": eta}
        yield "erasure_tomography", {"d": 2, "eta": eta}
        yield "lossy_multiphase", {"p": 2, "eta": eta}
        yield "qudit_dephasing_unitary", {"d": 3, "eta": eta}


class TestAlphaBeta:
    def test_zero_gauge(self):
        ch = zoo_build("gad")
        for x in range(2):
            a, b = build_alpha_beta(ch, zero_gauge(ch), x)
            dk, k = ch.dkraus[x], ch.kraus[x]
            assert np.allclose(a, sum(d.conj().T @ d for d in dk))
            assert np.allclose(b, sum(d.conj().T @ kk for d, kk in zip(dk, k)))

    @pytest.mark.parametrize("h", [-0.7, 0.0, 0.3])
    def test_unitary_scalar_gauge(self, h):
        # dK = -i G K at theta = 0, so D = -i (G + h)
        a, b = build_alpha_beta(unitary_sz(), [np.array([[h]])], 0)
        g = SZ / 2 + h * np.eye(2)
        assert np.allclose(a, g @ g) and np.allclose(b, 1j * g)

    @pytest.mark.parametrize("eta", [0.2, 0.5, 0.8])
    def test_phase_loss_known_gauge(self, eta):
        ch = zoo_build("phase_loss", eta=eta).select([0])
        a, b = build_alpha_beta(ch, [np.diag([0, -eta / (1 - eta)])], 0)
        assert np.allclose(4 * a, np.diag([4 * eta / (1 - eta), 0]), atol=1e-12)
        assert np.abs(b).max() < 1e-12
        # same channel with the loss Kraus operator also carrying exp(-i phi):
        # every gauge shifts by -|1><1|, giving diag(0, -1/(1-eta))
        k = ch.kraus[0]
        dk = ch.dkraus[0].copy()
        dk[1] = -1j * k[1]
        shifted = ParamChannel.single(k, [dk], ch.labels)
        a, b = build_alpha_beta(shifted, [np.diag([0, -1 / (1 - eta)])], 0)
        assert np.allclose(4 * a, np.diag([4 * eta / (1 - eta), 0]), atol=1e-12)
        assert np.abs(b).max() < 1e-12
        s1 = single_use_bound(shifted, gap_tol=1e-12).gauge[0]
        assert np.allclose(s1, np.diag([-1 + 1 / (1 + np.sqrt(eta)), -1]), atol=1e-5)

    def test_dimension_mismatch(self):
        ch = zoo_build("gad")
        with pytest.raises(ValueError):
            build_alpha_beta(ch, [np.zeros((2, 2))] * 2, 0)


class TestSingleUse:
    def test_gad_triple(self):
        ch = zoo_build("gad", nu=0.25, gamma=0.5)
        f = single_use_bound(ch).value
        s = sum_of_singles(ch)
        r = rld_bound(ch)
        assert abs(f - 3.84) <= 0.01 and abs(s - 4.72) <= 0.01
        assert r.finite and abs(r.value - 10.67) <= 0.01
        assert f < s < r.value

    @pytest.mark.parametrize("eta", [0.3, 0.5, 0.7])
    def test_phase_dephasing(self, eta):
        forms = phase_dephasing_forms(eta)
        f = single_use_bound(zoo_build("phase_dephasing", eta=eta)).value
        assert f == pytest.approx(forms["F_phi"] + forms["F_eta"], rel=1e-7)

    def test_unitary_qubit(self):
        res = single_use_bound(unitary_sz())
        assert res.value == pytest.approx(1.0, abs=1e-8)
        assert res.gauge[0].real.item() == pytest.approx(0.0, abs=1e-4)

    @pytest.mark.parametrize("eta", [0.2, 0.5, 0.8])
    def test_phase_loss_singles(self, eta):
        ch = zoo_build("phase_loss", eta=eta)
        forms = phase_loss_forms(eta)
        assert single_use_bound(ch.select([0])).value == pytest.approx(forms["F_phi"], rel=1e-7)
        assert single_use_bound(ch.select([1])).value == pytest.approx(forms["F_eta"], rel=1e-7)

    def test_split_matches_stacked(self):
        for name, kw in hks_zoo():
            ch = zoo_build(name, **kw)
            a = single_use_bound(ch).value
            b = single_use_bound(ch, formulation="stacked").value
            assert a == pytest.approx(b, rel=1e-7, abs=1e-9), (name, kw)

    @pytest.mark.parametrize("seed", range(6))
    def test_random_channels_vs_cvxpy(self, seed):
        rng = np.random.default_rng(seed)
        ch = random_isometry_channel(rng, dim_in=2, dim_out=int(rng.integers(2, 4)), rank=2)
        w = rng.uniform(0.5, 2.0, 2)
        assert single_use_bound(ch, w).value == pytest.approx(cvx_channel_bound(ch, w), rel=1e-6)

    def test_weights_validated(self):
        ch = zoo_build("gad")
        with pytest.raises(ValueError):
            single_use_bound(ch, [1.0])
        with pytest.raises(ValueError):
            single_use_bound(ch, [1.0, -1.0])


class TestSql:
    def test_qudit_dephasing_closed_form(self):
        d, eta = 2, 0.5
        ch = zoo_build("qudit_dephasing_unitary", d=d, eta=eta)
        want = 4 * eta * (d - 1) / ((1 - eta) * (d + 2 / eta))
        assert want == pytest.approx(2 / 3)
        assert sql_bound(ch).value == pytest.approx(want, rel=1e-6)

    @pytest.mark.parametrize("eta", [0.2, 0.5, 0.8])
    def test_phase_loss(self, eta):
        ch = zoo_build("phase_loss", eta=eta)
        want = 4 * eta / (1 - eta) + 1 / (eta * (1 - eta))
        assert sql_bound(ch).value == pytest.approx(want, rel=1e-6)
        assert sum_of_singles(ch, mode="sql") == pytest.approx(want, rel=1e-6)

    def test_phase_loss_half(self):
        assert sum_of_singles(zoo_build("phase_loss", eta=0.5), mode="sql") == pytest.approx(8, rel=1e-6)

    @pytest.mark.parametrize("d", [2, 3, 4])
    @pytest.mark.parametrize("eta", [0.2, 0.5, 0.8])
    def test_erasure_total(self, d, eta):
        ch = zoo_build("erasure_tomography", d=d, eta=eta)
        assert sql_bound(ch).value == pytest.approx(erasure_sql_total(d, eta), rel=1e-5)

    def test_erasure_d3_value(self):
        assert erasure_sql_total(3, 0.5) == pytest.approx(20 / 3)

    @pytest.mark.parametrize("eta", [0.3, 0.7])
    def test_single_parameter_published(self, eta):
        ch = zoo_build("phase_dephasing", eta=eta)
        assert sql_bound(ch.select([0])).value == pytest.approx(eta**2 / (1 - eta**2), rel=1e-6)
        ch = zoo_build("phase_loss", eta=eta)
        assert sql_bound(ch.select([0])).value == pytest.approx(4 * eta / (1 - eta), rel=1e-6)

    def test_beta_residuals(self):
        for name, kw in hks_zoo():
            res = sql_bound(zoo_build(name, **kw))
            assert max(res.beta_residuals) <= 1e-7, (name, kw)

    def test_sql_vs_cvxpy(self):
        for name, kw in [("gad", {}), ("phase_loss", {"eta": 0.4}), ("erasure_tomography", {"d": 2, "eta": 0.6})]:
            ch = zoo_build(name, **kw)
            assert sql_bound(ch).value == pytest.approx(cvx_channel_bound(ch, sql=True), rel=1e-6)

    def test_unitary_is_heisenberg(self):
        with pytest.raises(HeisenbergPossible):
            sql_bound(unitary_sz())


class TestInvariants:
    def test_triangle_chain(self):
        for name, kw in hks_zoo():
            ch = zoo_build(name, **kw)
            for w in (None, np.linspace(0.5, 2.0, ch.num_params)):
                assert single_use_bound(ch, w).value <= sum_of_singles(ch, w) * (1 + 1e-8), (name, kw)
                assert sql_bound(ch, w).value <= sum_of_singles(ch, w, "sql") * (1 + 1e-8), (name, kw)

    @settings(max_examples=40)
    @given(seeds)
    def test_kraus_mixing_invariance(self, seed):
        rng = np.random.default_rng(seed)
        ch = random_isometry_channel(rng, dim_in=2, dim_out=2, rank=2)
        mixed = ch.mixed([random_unitary(2, rng) for _ in range(2)])
        a, b = single_use_bound(ch).value, single_use_bound(mixed).value
        assert abs(a - b) <= 1e-8 * (1 + a)

    @pytest.mark.parametrize("name,kw", [("gad", {}), ("phase_loss", {"eta": 0.5}),
                                         ("erasure_tomography", {"d": 2, "eta": 0.5})])
    def test_mixing_invariance_zoo(self, name, kw, rng):
        ch = zoo_build(name, **kw)
        mixed = ch.mixed([random_unitary(ch.rank(x), rng) for x in range(ch.num_params)])
        for fn in (single_use_bound, sql_bound):
            a, b = fn(ch).value, fn(mixed).value
            assert abs(a - b) <= 1e-8 * (1 + a)

    @pytest.mark.parametrize("c", [0.1, 3.0, 17.0])
    def test_weight_homogeneity(self, c):
        ch = zoo_build("gad")
        w = np.array([1.0, 2.5])
        for fn in (single_use_bound, sql_bound):
            assert fn(ch, c * w).value == pytest.approx(c * fn(ch, w).value, rel=1e-7)

    def test_sql_below_rld(self):
        for name, kw in hks_zoo():
            ch = zoo_build(name, **kw)
            r = rld_bound(ch)
            if r.finite:
                assert sql_bound(ch).value <= r.value * (1 + 1e-8), (name, kw)

    def test_single_use_below_sql(self):
        for name, kw in hks_zoo():
            ch = zoo_build(name, **kw)
            assert single_use_bound(ch).value <= sql_bound(ch).value * (1 + 1e-8)


class TestRld:
    def test_unitary_infinite(self):
        r = rld_bound(unitary_sz())
        assert not r.finite and math.isinf(r.value)

    def test_gad_value(self):
        assert rld_bound(zoo_build("gad")).value == pytest.approx(10.667, abs=1e-3)


class TestNoiseless:
    def test_single_generator(self):
        assert kura_ueda_bound([SZ / 2]) == pytest.approx(1.0)

    def test_commuting_diag(self):
        gens = [np.diag(np.eye(3)[j]) for j in range(3)]
        assert kura_ueda_bound(gens) == pytest.approx(4.0)

    def test_full_generators_dominate_probe_qfi(self):
        from qchanbound.states import qfi_matrix_purification
        d = 3
        gens, _ = u_d_generators(d)
        value = kura_ueda_bound(gens)
        want = 4 * operator_norm(sum(g @ g for g in gens))
        assert value == pytest.approx(want)
        # maximally entangled probe on system (x) ancilla; derivative -i (G (x) I) psi
        psi = np.eye(d).reshape(-1) / np.sqrt(d)
        jac = np.stack([-1j * np.kron(g, np.eye(d)) @ psi for g in gens], axis=1)
        f = qfi_matrix_purification(jac, psi)
        assert np.trace(f) <= value + 1e-10

    def test_gauge_optimized_bound_is_tighter(self):
        # the channel bound may also shift each generator by a constant
        gens, _ = u_d_generators(3)
        ch = zoo_build("unitary_family", d=3)
        assert single_use_bound(ch).value <= kura_ueda_bound(gens) * (1 + 1e-8)
        ch = zoo_build("unitary_family", generators_list=[SZ / 2])
        assert single_use_bound(ch).value == pytest.approx(kura_ueda_bound([SZ / 2]), rel=1e-7)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            kura_ueda_bound([np.array([[0, 1], [0, 0]])])


class TestFiniteN:
    def test_n1_single_use_gauge(self):
        ch = zoo_build("gad")
        res = single_use_bound(ch)
        val = finite_n_bound_eval(ch, gauge_candidates=[res.gauge], n=1)
        assert val == pytest.approx(res.value, rel=1e-7)
        assert finite_n_bound_eval(ch, n=1) >= res.value * (1 - 1e-8)

    @pytest.mark.parametrize("n", [1, 5, 40])
    def test_sql_gauge_linear(self, n):
        for name, kw in [("gad", {}), ("phase_loss", {"eta": 0.5}), ("phase_dephasing", {"eta": 0.3})]:
            ch = zoo_build(name, **kw)
            res = sql_bound(ch)
            for fn in (finite_n_bound_eval, parallel_bound_eval):
                val = fn(ch, gauge_candidates=[res.gauge], n=n)
                assert val == pytest.approx(n * res.value, rel=1e-6)

    def test_gad_n10_triangle(self):
        ch = zoo_build("gad")
        joint = finite_n_bound_eval(ch, n=10)
        singles = [finite_n_bound_eval(ch.select([x]), n=10) for x in range(2)]
        assert joint <= sum(singles) * (1 + 1e-8)

    def test_unitary_hand_expansion(self):
        ch = unitary_sz()
        g = [np.zeros((1, 1))]
        # alpha = I/4, beta = i sigma_z / 2, beta^2 = -I/4
        assert parallel_bound_eval(ch, gauge_candidates=[g], n=5) == pytest.approx(4 * (5 / 4 + 20 / 4))
        assert finite_n_bound_eval(ch, gauge_candidates=[g], n=5) == pytest.approx(4 * (5 / 4 + 20 * 0.5 * 1.5))

    def test_both_dominate_single_use_at_n1(self):
        ch = zoo_build("phase_loss", eta=0.4)
        f = single_use_bound(ch).value
        assert finite_n_bound_eval(ch, n=1) >= f * (1 - 1e-8)
        assert parallel_bound_eval(ch, n=1) >= f * (1 - 1e-8)

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            finite_n_bound_eval(zoo_build("gad"), n=0)


class TestMarkovian:
    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_grover_dephasing(self, d):
        assert markovian_sql_bound(grover_dephasing(d, 1.0)).value == pytest.approx(
            4 * (d - 1) / (d + 2), rel=1e-6)

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_grover_erasure(self, d):
        assert markovian_sql_bound(grover_erasure(d, 1.0)).value == pytest.approx(4 * (d - 1) / d, rel=1e-6)

    def test_named_values(self):
        assert markovian_sql_bound(grover_dephasing(4, 1.0)).value == pytest.approx(2.0, rel=1e-6)
        assert markovian_sql_bound(grover_erasure(2, 1.0)).value == pytest.approx(2.0, rel=1e-6)

    @pytest.mark.parametrize("gamma", [0.5, 2.0])
    def test_rate_scaling(self, gamma):
        d = 3
        assert markovian_sql_bound(grover_dephasing(d, gamma)).value == pytest.approx(
            4 * (d - 1) / (gamma * (d + 2)), rel=1e-6)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 3.0])
    def test_discretization_limit(self, gamma):
        tau = 1e-4
        eta = math.exp(-gamma * tau)
        ch = zoo_build("phase_dephasing", eta=eta).select([0])
        per_time = tau * sql_bound(ch).value
        assert markovian_sql_bound(qubit_dephasing_lindblad(gamma)).value == pytest.approx(per_time, rel=1e-3)

    def test_coherent_noise_is_heisenberg(self):
        from qchanbound.channels import LindbladModel
        sx = np.array([[0, 1], [1, 0]], complex)
        with pytest.raises(HeisenbergPossible):
            markovian_sql_bound(LindbladModel((sx / 2,), ((0.5 * SZ)[None],)))
