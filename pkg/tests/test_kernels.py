import math

import numpy as np
import pytest
from conftest import max_principal_angle
from hypothesis import given, settings
from hypothesis import strategies as st

from subtrack import (
    ContractViolationError,
    DegenerateUpdateError,
    Observation,
    RankLossError,
    SubspaceEstimate,
    build_rotation,
    complement_basis,
    compute_intermediates,
    greedy_step_scalars,
    impute_vector,
    nonunit_eigenvalues,
    reorthonormalize,
    restricted_least_squares,
    structured_update_svd,
    subspace_error,
)
from subtrack.datagen import random_orthonormal

# Golden-ratio closed forms for ||w|| = ||r|| = 1, frozen from a 40-digit
# evaluation of the defining equations.
LAM_UNIT = 2.6180339887498948482
BETA_UNIT = 0.52573111211913360603
ALPHA_UNIT = 0.85065080835203993218
ETA_UNIT = 0.55357435889704525151

norms = st.floats(min_value=1e-3, max_value=1e3)
squared_norms = st.floats(min_value=0.0, max_value=1e6)


def full_observation(vector):
    return Observation(np.arange(len(vector)), vector)


class TestSubspaceEstimate:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ContractViolationError):
            SubspaceEstimate(np.ones((4, 2)))

    def test_rejects_square_or_fat(self):
        with pytest.raises(ContractViolationError):
            SubspaceEstimate(np.eye(3))

    def test_dimensions_and_drift(self):
        est = random_orthonormal(30, 4, seed=0)
        assert (est.n, est.d) == (30, 4)
        assert est.drift < 1e-12


class TestObservation:
    def test_rejects_unsorted(self):
        with pytest.raises(ContractViolationError):
            Observation([3, 1], [1.0, 2.0])

    def test_rejects_duplicates(self):
        with pytest.raises(ContractViolationError):
            Observation([1, 1], [1.0, 2.0])

    def test_rejects_empty(self):
        with pytest.raises(ContractViolationError):
            Observation([], [])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ContractViolationError):
            Observation([0, 1], [1.0])

    def test_out_of_range_detected_at_use(self):
        est = random_orthonormal(5, 2, seed=0)
        obs = Observation([0, 7], [1.0, 2.0])
        with pytest.raises(ContractViolationError):
            restricted_least_squares(est, obs)


class TestRestrictedLeastSquares:
    def test_full_observation_is_projection(self):
        est = random_orthonormal(12, 3, seed=1)
        v = np.random.default_rng(2).standard_normal(12)
        w = restricted_least_squares(est, full_observation(v))
        np.testing.assert_allclose(w, est.basis.T @ v, atol=1e-13)

    def test_scalar_projection(self):
        est = SubspaceEstimate(np.array([[1.0], [0.0]]))
        w = restricted_least_squares(est, Observation([0], [3.0]))
        np.testing.assert_allclose(w, [3.0])

    def test_minimum_norm_on_zero_system(self):
        basis = np.zeros((3, 2))
        basis[0, 0] = 1.0
        basis[1, 1] = 1.0
        est = SubspaceEstimate(basis)
        w = restricted_least_squares(est, Observation([2], [5.0]))
        np.testing.assert_allclose(w, [0.0, 0.0])

    def test_matches_pseudoinverse_oracle(self):
        rng = np.random.default_rng(20)
        est = random_orthonormal(20, 4, seed=21)
        omega = np.sort(rng.choice(20, size=9, replace=False))
        values = rng.standard_normal(9)
        w = restricted_least_squares(est, Observation(omega, values))
        expected = np.linalg.pinv(est.basis[omega]) @ values
        np.testing.assert_allclose(w, expected, atol=1e-10)

    @pytest.mark.parametrize("obs_count", [3, 9, 20])
    def test_residual_orthogonal_to_restricted_span(self, obs_count):
        # holds also when |omega| < d (min-norm branch)
        rng = np.random.default_rng(obs_count)
        est = random_orthonormal(20, 4, seed=22)
        omega = np.sort(rng.choice(20, size=obs_count, replace=False))
        values = rng.standard_normal(obs_count)
        w = restricted_least_squares(est, Observation(omega, values))
        sub = est.basis[omega]
        assert np.linalg.norm(sub.T @ (sub @ w - values)) <= 1e-10 * np.linalg.norm(values)


class TestComputeIntermediates:
    def test_in_span_observation(self):
        est = random_orthonormal(15, 3, seed=3)
        w0 = np.array([1.0, -2.0, 0.5])
        v = est.basis @ w0
        inter = compute_intermediates(est, full_observation(v), w0)
        np.testing.assert_allclose(inter.r, 0.0, atol=1e-14)
        assert inter.sigma <= 1e-13

    def test_zero_coefficients(self):
        est = random_orthonormal(10, 2, seed=4)
        obs = Observation([1, 4], [2.0, -3.0])
        inter = compute_intermediates(est, obs, np.zeros(2))
        np.testing.assert_array_equal(inter.p, np.zeros(10))
        assert inter.sigma == 0.0
        np.testing.assert_array_equal(inter.r[obs.omega], obs.values)

    def test_sigma_matches_compensated_norms(self):
        rng = np.random.default_rng(5)
        est = random_orthonormal(200, 10, seed=6)
        omega = np.sort(rng.choice(200, size=60, replace=False))
        obs = Observation(omega, rng.standard_normal(60))
        w = restricted_least_squares(est, obs)
        inter = compute_intermediates(est, obs, w)

        def fsum_norm(x):
            return math.sqrt(math.fsum(float(e) * float(e) for e in x))

        expected = fsum_norm(inter.r) * fsum_norm(inter.p)
        assert abs(inter.sigma - expected) <= 1e-14 * max(1.0, expected)

    def test_prediction_and_masked_residual(self):
        rng = np.random.default_rng(7)
        est = random_orthonormal(30, 5, seed=8)
        omega = np.sort(rng.choice(30, size=11, replace=False))
        obs = Observation(omega, rng.standard_normal(11))
        w = rng.standard_normal(5)
        inter = compute_intermediates(est, obs, w)
        np.testing.assert_allclose(inter.p, est.basis @ w, atol=1e-14)
        off = np.setdiff1d(np.arange(30), omega)
        assert np.all(inter.r[off] == 0.0)
        np.testing.assert_allclose(inter.r[omega], obs.values - inter.p[omega], atol=1e-15)

    def test_wrong_coefficient_length(self):
        est = random_orthonormal(10, 3, seed=9)
        with pytest.raises(ContractViolationError):
            compute_intermediates(est, Observation([0], [1.0]), np.zeros(2))


class TestImputeVector:
    def test_full_observation_returns_values_exactly(self):
        est = random_orthonormal(8, 2, seed=10)
        v = np.random.default_rng(11).standard_normal(8)
        w = restricted_least_squares(est, full_observation(v))
        np.testing.assert_array_equal(impute_vector(est, full_observation(v), w), v)

    def test_unobserved_entries_filled_from_model(self):
        est = random_orthonormal(8, 2, seed=12)
        obs = Observation([1, 5], [0.3, -0.7])
        w = restricted_least_squares(est, obs)
        filled = impute_vector(est, obs, w)
        prediction = est.basis @ w
        off = np.setdiff1d(np.arange(8), obs.omega)
        np.testing.assert_array_equal(filled[off], prediction[off])
        np.testing.assert_array_equal(filled[obs.omega], obs.values)


class TestNonunitEigenvalues:
    def test_zero_w_factorizes(self):
        for r_sq in (0.25, 4.0):
            lam_max, lam_min = nonunit_eigenvalues(0.0, r_sq)
            assert lam_max == pytest.approx(max(1.0, r_sq), abs=1e-15)
            assert lam_min == pytest.approx(min(1.0, r_sq), abs=1e-15)

    def test_unit_case_matches_dense_eig(self):
        lam_max, lam_min = nonunit_eigenvalues(1.0, 1.0)
        assert lam_max == pytest.approx(LAM_UNIT, abs=1e-15)
        assert lam_min == pytest.approx(3.0 - LAM_UNIT, abs=1e-15)
        # oracle: Gram matrix of the d=1 update with w=(1), ||r||=1
        dense = np.linalg.eigvalsh(np.array([[2.0, 1.0], [1.0, 1.0]]))
        np.testing.assert_allclose(sorted((lam_min, lam_max)), dense, atol=1e-14)

    def test_rejects_negative_inputs(self):
        with pytest.raises(ContractViolationError):
            nonunit_eigenvalues(-1.0, 1.0)

    @given(w_sq=squared_norms, r_sq=squared_norms)
    @settings(max_examples=300)
    def test_vieta_identities(self, w_sq, r_sq):
        lam_max, lam_min = nonunit_eigenvalues(w_sq, r_sq)
        assert lam_max >= lam_min >= 0.0
        total = w_sq + r_sq + 1.0
        assert lam_max + lam_min == pytest.approx(total, rel=1e-12)
        assert lam_max * lam_min == pytest.approx(r_sq, rel=1e-12, abs=1e-300)


class TestGreedyStepScalars:
    def test_unit_case_frozen_values(self):
        scalars = greedy_step_scalars(1.0, 1.0, 1.0)
        assert scalars.lam == pytest.approx(LAM_UNIT, abs=1e-15)
        assert scalars.beta == pytest.approx(BETA_UNIT, abs=1e-15)
        assert scalars.alpha == pytest.approx(ALPHA_UNIT, abs=1e-15)
        assert scalars.eta == pytest.approx(ETA_UNIT, abs=1e-15)

    def test_unit_case_matches_dense_eigenvector(self):
        scalars = greedy_step_scalars(1.0, 1.0, 1.0)
        vals, vecs = np.linalg.eigh(np.array([[2.0, 1.0], [1.0, 1.0]]))
        lead = vecs[:, np.argmax(vals)]
        lead *= np.sign(lead[0])
        np.testing.assert_allclose([scalars.alpha, scalars.beta], lead, atol=1e-14)

    def test_rejects_degenerate(self):
        for args in [(0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0)]:
            with pytest.raises(DegenerateUpdateError):
                greedy_step_scalars(*args)

    @given(w=norms, r=norms)
    @settings(max_examples=300)
    def test_unit_norm_identity(self, w, r):
        s = greedy_step_scalars(w, r, w * r)
        assert s.alpha**2 * w**2 + s.beta**2 == pytest.approx(1.0, abs=1e-12)

    @given(w=norms, r=norms)
    @settings(max_examples=300)
    def test_defining_eigen_equations(self, w, r):
        s = greedy_step_scalars(w, r, w * r)
        scale = max(1.0, s.lam)
        assert abs(s.alpha * (1.0 + w**2 - s.lam) + r * s.beta) <= 1e-10 * scale
        assert abs(s.alpha * r * w**2 + (r**2 - s.lam) * s.beta) <= 1e-10 * scale

    @given(w=norms, r=norms)
    @settings(max_examples=200)
    def test_angle_forms_agree(self, w, r):
        sigma = w * r
        s = greedy_step_scalars(w, r, sigma)
        theta = sigma * s.eta
        assert math.sin(theta) == pytest.approx(s.beta, abs=1e-12)
        assert math.cos(theta) == pytest.approx(s.alpha * w, abs=1e-12)

    def test_eigenpair_residual_on_explicit_matrix(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            d = int(rng.integers(1, 8))
            w = rng.standard_normal(d) * 10.0 ** rng.integers(-2, 3)
            r = float(10.0 ** rng.uniform(-2, 2))
            w_norm = np.linalg.norm(w)
            s = greedy_step_scalars(w_norm, r, w_norm * r)
            gram = np.zeros((d + 1, d + 1))
            gram[:d, :d] = np.eye(d) + np.outer(w, w)
            gram[:d, d] = r * w
            gram[d, :d] = r * w
            gram[d, d] = r * r
            vec = np.concatenate([s.alpha * w, [s.beta]])
            assert np.linalg.norm(gram @ vec - s.lam * vec) <= 1e-10 * s.lam


class TestStructuredUpdateSVD:
    def test_d1_matches_dense_eigendecomposition(self):
        result = structured_update_svd(np.array([1.0]), 1.0)
        vals, vecs = np.linalg.eigh(np.array([[2.0, 1.0], [1.0, 1.0]]))
        lead = vecs[:, np.argmax(vals)]
        lead *= np.sign(lead[0])
        assert result.u_hat.shape == (2, 1)
        np.testing.assert_allclose(result.u_hat[:, 0], lead, atol=1e-14)

    @pytest.mark.parametrize("d", [1, 2, 4, 10])
    def test_u_hat_orthonormal(self, d):
        rng = np.random.default_rng(d)
        result = structured_update_svd(rng.standard_normal(d), float(rng.uniform(0.1, 5)))
        gram = result.u_hat.T @ result.u_hat
        assert np.linalg.norm(gram - np.eye(d)) < 1e-10

    def test_random_case_against_dense_svd(self):
        rng = np.random.default_rng(14)
        w = rng.standard_normal(4)
        r_norm = 0.8
        result = structured_update_svd(w, r_norm)
        update = np.zeros((5, 5))
        update[:4, :4] = np.eye(4)
        update[:4, 4] = w
        update[4, 4] = r_norm
        u_oracle, s_oracle, _ = np.linalg.svd(update)
        np.testing.assert_allclose(result.singular_values, s_oracle, atol=1e-10)
        assert max_principal_angle(result.u_hat, u_oracle[:, :4]) < 1e-8

    def test_gram_reconstruction_from_full_factors(self):
        # the discarded trailing vector is the unit normal to span(u_hat)
        rng = np.random.default_rng(15)
        w = rng.standard_normal(4)
        r_norm = 1.7
        result = structured_update_svd(w, r_norm)
        q, _ = np.linalg.qr(result.u_hat, mode="complete")
        last = q[:, 4]
        full_basis = np.column_stack([result.u_hat, last])
        gram = full_basis @ np.diag(result.singular_values**2) @ full_basis.T
        update = np.zeros((5, 5))
        update[:4, :4] = np.eye(4)
        update[:4, 4] = w
        update[4, 4] = r_norm
        np.testing.assert_allclose(gram, update @ update.T, atol=1e-10)

    def test_rejects_degenerate(self):
        with pytest.raises(DegenerateUpdateError):
            structured_update_svd(np.zeros(3), 1.0)
        with pytest.raises(DegenerateUpdateError):
            structured_update_svd(np.ones(3), 0.0)


class TestBuildRotation:
    def test_d1_is_sign(self):
        np.testing.assert_array_equal(build_rotation(np.array([2.5])), [[1.0]])
        np.testing.assert_array_equal(build_rotation(np.array([-0.3])), [[-1.0]])

    def test_axis_aligned_first_column(self):
        rot = build_rotation(np.array([0.0, 2.0, 0.0]))
        np.testing.assert_allclose(rot[:, 0], [0.0, 1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(rot.T @ rot, np.eye(3), atol=1e-14)

    def test_random_d10(self):
        rng = np.random.default_rng(16)
        w = rng.standard_normal(10)
        rot = build_rotation(w)
        assert np.linalg.norm(rot.T @ rot - np.eye(10)) < 1e-12
        assert np.linalg.norm(rot @ np.eye(10)[:, 0] - w / np.linalg.norm(w)) < 1e-12

    def test_deterministic(self):
        w = np.random.default_rng(17).standard_normal(6)
        np.testing.assert_array_equal(build_rotation(w), build_rotation(w))

    def test_complement_projector_identity(self):
        # Z Z^T = I - w w^T / ||w||^2 regardless of the basis choice
        rng = np.random.default_rng(18)
        w = rng.standard_normal(7)
        z = complement_basis(w)
        unit = w / np.linalg.norm(w)
        np.testing.assert_allclose(z @ z.T, np.eye(7) - np.outer(unit, unit), atol=1e-13)

    def test_rejects_zero(self):
        with pytest.raises(DegenerateUpdateError):
            build_rotation(np.zeros(4))


class TestReorthonormalize:
    def test_identity_on_orthonormal_input(self):
        est = random_orthonormal(40, 6, seed=19)
        out = reorthonormalize(est)
        assert np.linalg.norm(out.basis - est.basis) < 1e-14
        assert out.drift < 1e-14

    def test_scaled_columns_recover_span(self):
        est = random_orthonormal(25, 4, seed=23)
        scaled = SubspaceEstimate.__new__(SubspaceEstimate)
        scaled.basis = est.basis * 2.0
        scaled.ortho_tol = 1e10  # bypass construction check for the bad input
        out = reorthonormalize(scaled)
        np.testing.assert_allclose(np.linalg.norm(out.basis, axis=0), 1.0, atol=1e-14)
        assert max_principal_angle(out.basis, est.basis) < 1e-12

    def test_perturbed_basis_span_preserved(self):
        rng = np.random.default_rng(24)
        est = random_orthonormal(30, 5, seed=25)
        noisy = SubspaceEstimate.__new__(SubspaceEstimate)
        noisy.basis = est.basis + 1e-6 * rng.standard_normal((30, 5))
        noisy.ortho_tol = 1e10
        out = reorthonormalize(noisy)
        assert out.drift < 1e-14
        assert max_principal_angle(out.basis, noisy.basis) < 1e-12

    def test_rank_deficient_raises(self):
        est = random_orthonormal(10, 3, seed=26)
        bad = SubspaceEstimate.__new__(SubspaceEstimate)
        bad.basis = est.basis.copy()
        bad.basis[:, 2] = bad.basis[:, 1]
        bad.ortho_tol = 1e10
        with pytest.raises(RankLossError):
            reorthonormalize(bad)


class TestSubspaceError:
    def test_identical_spans(self):
        est = random_orthonormal(50, 5, seed=27)
        assert subspace_error(est, est) == 0.0

    def test_orthogonal_spans(self):
        eye = np.eye(20)
        a = SubspaceEstimate(eye[:, :3])
        b = SubspaceEstimate(eye[:, 3:6])
        assert subspace_error(a, b) == pytest.approx(3.0, abs=1e-15)

    def test_invariant_under_rotation(self):
        truth = random_orthonormal(40, 6, seed=28)
        rot = build_rotation(np.random.default_rng(29).standard_normal(6))
        rotated = SubspaceEstimate(truth.basis @ rot)
        assert subspace_error(rotated, truth) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolationError):
            subspace_error(random_orthonormal(10, 2, 0), random_orthonormal(10, 3, 0))
