import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robust_td._validation import is_primitive
from robust_td.harness.instances import generate_instance
from robust_td.mrp import (
    Mrp,
    bellman_values,
    corrupted_fixed_point,
    design_attack_vector,
    matrix_mixing_time,
    mixing_profile,
    mixing_time,
    mrp_from_text,
    mrp_to_text,
    stationary_distribution,
    steady_state,
)

from conftest import random_stochastic, tabular_mrp


def eig_oracle(P):
    w, V = np.linalg.eig(P.T)
    v = np.real(V[:, np.argmin(np.abs(w - 1.0))])
    return v / v.sum()


def brute_tv_mixing_time(P, eta=0.25, t_max=100):
    pi = eig_oracle(P)
    for t in range(1, t_max + 1):
        Pt = np.linalg.matrix_power(P, t)
        worst = max(0.5 * sum(abs(Pt[x, y] - pi[y]) for y in range(P.shape[0])) for x in range(P.shape[0]))
        if worst <= eta:
            return t
    return None


class TestStationary:
    def test_single_state(self):
        assert stationary_distribution([[1.0]]).tolist() == [1.0]

    def test_symmetric_pair(self):
        np.testing.assert_allclose(stationary_distribution([[0.5, 0.5], [0.5, 0.5]]), [0.5, 0.5], atol=1e-15)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_eigenvector_oracle(self, seed):
        P = random_stochastic(4, np.random.default_rng(seed), floor=1e-3)
        pi = stationary_distribution(P)
        np.testing.assert_allclose(pi, eig_oracle(P), atol=1e-10)
        assert np.all(pi >= 0) and abs(pi.sum() - 1) < 1e-12
        assert np.abs(pi @ P - pi).max() < 1e-10

    @given(st.integers(0, 10**6), st.permutations(range(5)))
    def test_permutation_equivariance(self, seed, perm):
        P = random_stochastic(5, np.random.default_rng(seed), floor=1e-3)
        p = np.array(perm)
        np.testing.assert_allclose(stationary_distribution(P[np.ix_(p, p)]), stationary_distribution(P)[p], atol=1e-11)

    @pytest.mark.parametrize("P", [
        [[0.0, 1.0], [1.0, 0.0]],
        [[1.0, 0.0], [0.0, 1.0]],
        [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]],
    ], ids=["periodic", "identity", "reducible"])
    def test_rejects_non_primitive(self, P):
        with pytest.raises(ValueError):
            stationary_distribution(P)

    def test_rejects_non_stochastic(self):
        with pytest.raises(ValueError, match="row 1"):
            stationary_distribution([[0.5, 0.5], [0.5, 0.6]])
        with pytest.raises(ValueError, match="negative"):
            stationary_distribution([[1.5, -0.5], [0.5, 0.5]])


class TestPrimitivity:
    def test_cycle_with_self_loop_is_primitive(self):
        P = np.roll(np.eye(6), 1, axis=1)
        assert not is_primitive(P)
        P[0] = 0.5 * P[0]
        P[0, 0] = 0.5
        assert is_primitive(P)

    def test_wielandt_extremal_matrix(self):
        # Needs exactly (m-1)^2 + 1 steps to become positive.
        m = 5
        B = np.zeros((m, m))
        for i in range(m - 1):
            B[i, i + 1] = 1
        B[m - 1, 0] = B[m - 1, 1] = 1
        assert is_primitive(B)
        e = (m - 1) ** 2
        assert not np.all(np.linalg.matrix_power(B, e) > 0)


class TestMixingTime:
    def test_rows_equal_pi(self):
        pi = np.array([0.2, 0.3, 0.5])
        assert mixing_time(np.tile(pi, (3, 1))) == 1

    def test_identity_raises(self):
        with pytest.raises(ValueError):
            mixing_time(np.eye(2))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force_tv(self, seed):
        rng = np.random.default_rng(100 + seed)
        P = 0.9 * np.eye(3) + 0.1 * random_stochastic(3, rng)
        expected = brute_tv_mixing_time(P)
        assert expected is not None
        assert mixing_time(P) == expected

    def test_profile_non_increasing(self):
        P = 0.8 * np.eye(4) + 0.2 * random_stochastic(4, np.random.default_rng(3))
        prof = mixing_profile(P, 50)
        assert np.all(np.diff(prof) <= 1e-12)
        assert mixing_time(P) == int(np.argmax(prof <= 0.25)) + 1

    def test_eta_range(self):
        with pytest.raises(ValueError):
            mixing_time(np.full((2, 2), 0.5), eta=1.0)


class TestMrpValidation:
    def test_feature_norm(self):
        with pytest.raises(ValueError, match="squared norm"):
            Mrp(np.full((2, 2), 0.5), [0, 1], 0.5, [[1.0], [1.01]])

    def test_feature_rank(self):
        with pytest.raises(ValueError, match="full column rank"):
            Mrp(np.full((2, 2), 0.5), [0, 1], 0.5, [[0.5, 0.5], [0.5, 0.5]])

    def test_discount_range(self):
        with pytest.raises(ValueError):
            Mrp(np.full((2, 2), 0.5), [0, 1], 1.0, np.eye(2))

    def test_periodic_rejected(self):
        with pytest.raises(ValueError, match="irreducible"):
            Mrp([[0.0, 1.0], [1.0, 0.0]], [0, 1], 0.5, np.eye(2))

    def test_arrays_read_only(self, small_mrp):
        with pytest.raises(ValueError):
            small_mrp.transition[0, 0] = 1.0


class TestSteadyState:
    def test_scalar_geometric_series(self):
        ss = steady_state(Mrp([[1.0]], [1.0], 0.5, [[1.0]]))
        assert ss.theta_star[0] == pytest.approx(2.0, abs=1e-14)
        assert ss.omega == 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_tabular_matches_bellman_solve(self, seed):
        mrp = tabular_mrp(6, 0.8, seed)
        ss = steady_state(mrp)
        np.testing.assert_allclose(mrp.features @ ss.theta_star, bellman_values(mrp), rtol=1e-10, atol=1e-12)
        V = np.linalg.solve(np.eye(6) - 0.8 * mrp.transition, mrp.mean_rewards)
        np.testing.assert_allclose(bellman_values(mrp), V, rtol=1e-12)

    def test_reference_instance(self, reference_mrp):
        ss = steady_state(reference_mrp)
        assert np.all(np.isfinite(ss.theta_star))
        assert np.linalg.norm(ss.A_bar @ ss.theta_star + ss.b_bar) <= 1e-8
        assert 0 < ss.omega < 1
        assert np.linalg.norm(ss.A_bar, 2) <= 2
        np.testing.assert_allclose(ss.pi @ reference_mrp.transition, ss.pi, atol=1e-10)

    def test_dense_oracle(self, small_mrp):
        ss = steady_state(small_mrp)
        Phi, P, g = small_mrp.features, small_mrp.transition, small_mrp.discount
        D = np.diag(eig_oracle(P))
        np.testing.assert_allclose(ss.A_bar, Phi.T @ D @ (g * P - np.eye(8)) @ Phi, atol=1e-12)
        np.testing.assert_allclose(ss.b_bar, Phi.T @ D @ small_mrp.mean_rewards, atol=1e-12)
        assert ss.omega == pytest.approx(np.linalg.eigvalsh(Phi.T @ D @ Phi)[0], abs=1e-12)


def monotonicity_gaps(mrp, thetas):
    ss = steady_state(mrp)
    diff = ss.theta_star - thetas
    lhs = np.einsum("ij,ij->i", diff, thetas @ ss.A_bar.T + ss.b_bar)
    rhs = ss.omega * (1 - mrp.discount) * np.einsum("ij,ij->i", diff, diff)
    return lhs - rhs


def test_monotonicity_on_random_instances():
    rng = np.random.default_rng(5)
    for k in range(5):
        mrp = generate_instance(12, 4, 0.9, -1.0, 1.0, seed=k)
        thetas = 10 * rng.uniform(-1, 1, (1000, 4))
        assert monotonicity_gaps(mrp, thetas).min() >= -1e-10


class TestCorruptedFixedPoint:
    def test_no_contamination(self, small_mrp):
        ss = steady_state(small_mrp)
        np.testing.assert_array_equal(corrupted_fixed_point(ss, small_mrp, np.full(8, 1e6), 0.0), ss.theta_star)

    def test_truthful_corruption(self, small_mrp):
        ss = steady_state(small_mrp)
        np.testing.assert_allclose(corrupted_fixed_point(ss, small_mrp, small_mrp.mean_rewards, 0.3), ss.theta_star, atol=1e-12)

    @given(st.floats(0.0, 0.49))
    def test_affine_in_eps(self, eps):
        mrp = generate_instance(8, 3, 0.7, 0.0, 2.0, seed=11)
        ss = steady_state(mrp)
        C = np.linspace(-3, 3, 8)
        end = corrupted_fixed_point(ss, mrp, C, 0.49) - ss.theta_star
        got = corrupted_fixed_point(ss, mrp, C, eps) - ss.theta_star
        np.testing.assert_allclose(got, eps / 0.49 * end, atol=1e-10)

    def test_rejects_bad_inputs(self, small_mrp):
        ss = steady_state(small_mrp)
        with pytest.raises(ValueError):
            corrupted_fixed_point(ss, small_mrp, np.zeros(8), 0.5)
        with pytest.raises(ValueError):
            corrupted_fixed_point(ss, small_mrp, np.zeros(7), 0.1)
        with pytest.raises(ValueError):
            corrupted_fixed_point(ss, small_mrp, np.array([np.inf] + [0.0] * 7), 0.1)


class TestAttackDesign:
    def test_zero_steering(self, small_mrp):
        ss = steady_state(small_mrp)
        eps = 0.1
        np.testing.assert_allclose(design_attack_vector(ss, small_mrp, (1 - eps) * ss.theta_star, eps), 0, atol=1e-12)

    def test_steer_to_zero(self, small_mrp):
        ss = steady_state(small_mrp)
        C = design_attack_vector(ss, small_mrp, np.zeros(3), 0.05)
        np.testing.assert_allclose(corrupted_fixed_point(ss, small_mrp, C, 0.05), 0, atol=1e-8)

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.49))
    def test_round_trip_tabular(self, seed, eps):
        mrp = tabular_mrp(5, 0.9, 7)
        ss = steady_state(mrp)
        w = np.random.default_rng(seed).uniform(-10, 10, 5)
        C = design_attack_vector(ss, mrp, w, eps)
        np.testing.assert_allclose(corrupted_fixed_point(ss, mrp, C, eps), w, atol=1e-8)

    def test_round_trip_function_approximation(self, reference_mrp):
        ss = steady_state(reference_mrp)
        w = np.random.default_rng(0).normal(size=10)
        C = design_attack_vector(ss, reference_mrp, w, 0.01)
        np.testing.assert_allclose(corrupted_fixed_point(ss, reference_mrp, C, 0.01), w, atol=1e-8)

    def test_eps_zero_rejected(self, small_mrp):
        with pytest.raises(ValueError):
            design_attack_vector(steady_state(small_mrp), small_mrp, np.zeros(3), 0.0)


class TestMatrixMixingTime:
    def test_iid_chain_mixes_in_one_step(self):
        pi = np.array([0.25, 0.25, 0.5])
        mrp = Mrp(np.tile(pi, (3, 1)), [1, 2, 3], 0.5, np.eye(3))
        assert matrix_mixing_time(mrp, steady_state(mrp), 1e-6) == 1

    def test_matches_direct_scan(self, small_mrp):
        ss = steady_state(small_mrp)
        eta = 0.01
        tp = matrix_mixing_time(small_mrp, ss, eta)
        Phi, P, g = small_mrp.features, small_mrp.transition, small_mrp.discount
        M = [np.outer(Phi[s], g * P[s] @ Phi - Phi[s]) for s in range(8)]
        worst = []
        for k in range(1, tp + 60):
            Pk = np.linalg.matrix_power(P, k)
            worst.append(max(np.linalg.norm(sum(Pk[x, s] * M[s] for s in range(8)) - ss.A_bar, 2) for x in range(8)))
        worst = np.array(worst)
        assert np.all(worst[tp - 1:] <= eta)
        if tp > 1:
            assert worst[tp - 2] > eta


class TestSerialization:
    def test_round_trip_bit_exact(self, small_mrp):
        back = mrp_from_text(mrp_to_text(small_mrp))
        for name in ("transition", "mean_rewards", "features"):
            np.testing.assert_array_equal(getattr(back, name), getattr(small_mrp, name))
        assert back.discount == small_mrp.discount

    def test_unknown_key_rejected(self, small_mrp):
        data = json.loads(mrp_to_text(small_mrp))
        data["epsilon"] = 0.1
        with pytest.raises(ValueError, match="unknown keys"):
            mrp_from_text(json.dumps(data))

    def test_file_round_trip(self, tmp_path, small_mrp):
        from robust_td.mrp import load_mrp, save_mrp

        save_mrp(small_mrp, tmp_path / "m.json")
        np.testing.assert_array_equal(load_mrp(tmp_path / "m.json").features, small_mrp.features)
