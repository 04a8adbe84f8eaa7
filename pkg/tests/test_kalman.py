import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model, rel_err
from firkit.errors import (
    NotObservableError,
    SingularityError,
    UnsupportedConfigurationError,
)
from firkit.kalman import (
    if_predict,
    if_update,
    info_to_state,
    kf_gain_posterior_form,
    kf_predict,
    kf_run,
    kf_update,
    state_to_info,
)
from firkit.model import (
    InfoEstimate,
    MeasurementWindow,
    ModelSequence,
    StateEstimate,
)
from firkit.sim import SimConfig, simulate_trajectory


def scalar_model(f=1.0, h=1.0, q=0.0, r=1.0):
    return ModelSequence(f, h, q, r)


class TestKfPredict:
    def test_identity_dynamics(self):
        model = scalar_model(f=1.0, q=0.0)
        out = kf_predict(model, 1, StateEstimate(0, 2.0, 3.0))
        assert out.x_hat[0] == 2.0 and out.P[0, 0] == 3.0

    def test_scalar_substitution(self):
        model = scalar_model(f=2.0, q=1.0)
        out = kf_predict(model, 1, StateEstimate(0, 1.0, 1.0))
        assert out.x_hat[0] == 2.0 and out.P[0, 0] == 5.0

    def test_constant_velocity(self):
        model = ModelSequence([[1, 1], [0, 1]], [[1, 0]], np.zeros((2, 2)), [[1.0]])
        out = kf_predict(model, 1, StateEstimate(0, [0.0, 1.0], np.eye(2)))
        assert np.allclose(out.x_hat, [1.0, 1.0])
        assert np.allclose(out.P, [[2.0, 1.0], [1.0, 1.0]])

    def test_index_precondition(self):
        with pytest.raises(ValueError):
            kf_predict(scalar_model(), 2, StateEstimate(0, 0.0, 1.0))


class TestKfUpdate:
    def test_scalar_substitution(self):
        model = scalar_model()
        est, diag = kf_update(model, 1, StateEstimate(1, 0.0, 1.0), 2.0)
        assert diag.gain[0, 0] == pytest.approx(0.5)
        assert est.x_hat[0] == pytest.approx(1.0)
        assert est.P[0, 0] == pytest.approx(0.5)

    def test_zero_measurement_matrix(self):
        model = ModelSequence(1.0, 0.0, 0.0, 1.0)
        est, diag = kf_update(model, 1, StateEstimate(1, 3.0, 2.0), 99.0)
        assert diag.gain[0, 0] == 0.0
        assert est.x_hat[0] == 3.0 and est.P[0, 0] == 2.0

    def test_constant_velocity_hand_values(self):
        # hand evaluation: P H' = [2, 1]', S = 3, K = [2/3, 1/3]', innovation 1
        model = ModelSequence([[1, 1], [0, 1]], [[1, 0]], np.zeros((2, 2)), [[1.0]])
        predicted = StateEstimate(1, [1.0, 1.0], [[2.0, 1.0], [1.0, 1.0]])
        est, diag = kf_update(model, 1, predicted, 2.0)
        assert np.allclose(diag.gain[:, 0], [2 / 3, 1 / 3])
        assert diag.innovation[0] == pytest.approx(1.0)
        assert np.allclose(est.x_hat, [1 + 2 / 3, 1 + 1 / 3])


class TestGainPosteriorForm:
    def test_scalar(self):
        assert kf_gain_posterior_form(0.5, 1.0, 1.0)[0, 0] == pytest.approx(0.5)

    def test_zero_h(self):
        assert np.array_equal(kf_gain_posterior_form(np.eye(2), np.zeros((1, 2)), 1.0),
                              np.zeros((2, 1)))

    def test_matches_prefit_form_on_cv_example(self):
        model = ModelSequence([[1, 1], [0, 1]], [[1, 0]], np.zeros((2, 2)), [[1.0]])
        predicted = StateEstimate(1, [1.0, 1.0], [[2.0, 1.0], [1.0, 1.0]])
        est, diag = kf_update(model, 1, predicted, 2.0)
        posterior_form = kf_gain_posterior_form(est.P, model.H(1), model.R(1))
        assert np.allclose(posterior_form, diag.gain, atol=1e-12)

    def test_singular_r(self):
        with pytest.raises(SingularityError):
            kf_gain_posterior_form(1.0, 1.0, 0.0)


class TestIfPredict:
    def test_zero_information_stays_zero(self):
        model = scalar_model(f=1.0, q=1.0)
        out = if_predict(model, 1, InfoEstimate(0, 0.0, 0.0))
        assert out.Z[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert out.z_hat[0] == 0.0

    def test_scalar_pd_q(self):
        # covariance-form cross-check: P=1, x=3 -> P_pred=2, x_pred=3
        model = scalar_model(f=1.0, q=1.0)
        out = if_predict(model, 1, InfoEstimate(0, 3.0, 1.0))
        assert out.Z[0, 0] == pytest.approx(0.5)
        assert out.z_hat[0] == pytest.approx(1.5)

    def test_scalar_zero_q_branch(self):
        # covariance-form cross-check: P=0.5, x=1 -> x_pred=2, P_pred=2
        model = scalar_model(f=2.0, q=0.0)
        out = if_predict(model, 1, InfoEstimate(0, 2.0, 2.0))
        assert out.Z[0, 0] == pytest.approx(0.5)
        assert out.z_hat[0] == pytest.approx(1.0)

    def test_zero_q_needs_invertible_f(self):
        model = scalar_model(f=0.0, q=0.0)
        with pytest.raises(SingularityError):
            if_predict(model, 1, InfoEstimate(0, 1.0, 1.0))

    def test_pd_q_singular_f_from_zero_information(self):
        model = scalar_model(f=0.0, q=1.0)
        with pytest.raises(SingularityError):
            if_predict(model, 1, InfoEstimate(0, 0.0, 0.0))

    def test_singular_nonzero_q_with_pd_z(self):
        # direct form through P: P_pred = F P F' + Q
        q = np.array([[1.0, 0.0], [0.0, 0.0]])
        model = ModelSequence(np.eye(2), [[1.0, 0.0]], q, [[1.0]])
        prior = state_to_info(StateEstimate(0, [1.0, 2.0], np.eye(2)))
        out = if_predict(model, 1, prior)
        back = info_to_state(out)
        assert np.allclose(back.P, np.eye(2) + q)
        assert np.allclose(back.x_hat, [1.0, 2.0])

    def test_singular_nonzero_q_with_singular_z(self):
        q = np.array([[1.0, 0.0], [0.0, 0.0]])
        model = ModelSequence(np.eye(2), [[1.0, 0.0]], q, [[1.0]])
        with pytest.raises(UnsupportedConfigurationError):
            if_predict(model, 1, InfoEstimate(0, np.zeros(2), np.zeros((2, 2))))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_lemma_form_matches_direct_evaluation(self, seed):
        # independent route: Z_pred = (F Z^-1 F' + Q)^-1 evaluated literally
        rng = np.random.default_rng(seed)
        model = random_model(rng)
        n = model.n
        a = rng.standard_normal((n, n))
        Z = a @ a.T + 0.5 * np.eye(n)
        z = rng.standard_normal(n)
        out = if_predict(model, 1, InfoEstimate(0, z, Z))
        F, Q = model.F(1), model.Q(0)
        Zp_direct = np.linalg.inv(F @ np.linalg.inv(Z) @ F.T + Q)
        zp_direct = Zp_direct @ F @ np.linalg.inv(Z) @ z
        assert rel_err(out.Z, Zp_direct) < 1e-9
        assert rel_err(out.z_hat, zp_direct) < 1e-9


class TestIfUpdate:
    def test_first_step_pure_least_squares(self):
        model = scalar_model()
        out = if_update(model, 1, InfoEstimate(1, 0.0, 0.0), 3.0)
        assert out.Z[0, 0] == pytest.approx(1.0)
        assert out.z_hat[0] == pytest.approx(3.0)

    def test_additive(self):
        model = scalar_model()
        out = if_update(model, 1, InfoEstimate(1, 1.5, 0.5), 3.0)
        assert out.Z[0, 0] == pytest.approx(1.5)
        assert out.z_hat[0] == pytest.approx(4.5)

    def test_zero_h_unchanged(self):
        model = ModelSequence(1.0, 0.0, 0.0, 1.0)
        out = if_update(model, 1, InfoEstimate(1, 1.5, 0.5), 3.0)
        assert out.Z[0, 0] == 0.5 and out.z_hat[0] == 1.5

    def test_singular_r(self):
        model = ModelSequence(1.0, 1.0, 0.0, 0.0)
        with pytest.raises(SingularityError):
            if_update(model, 1, InfoEstimate(1, 0.0, 1.0), 1.0)


class TestConversions:
    def test_scalar(self):
        est = info_to_state(InfoEstimate(0, 3.0, 1.0))
        assert est.x_hat[0] == 3.0 and est.P[0, 0] == 1.0

    def test_zero_information_is_not_convertible(self):
        with pytest.raises(NotObservableError):
            info_to_state(InfoEstimate(0, 0.0, 0.0))

    def test_diagonal(self):
        est = info_to_state(InfoEstimate(0, [2.0, 4.0], np.diag([2.0, 4.0])))
        assert np.allclose(est.x_hat, [1.0, 1.0])
        assert np.allclose(est.P, np.diag([0.5, 0.25]))

    def test_state_to_info_roundtrip(self):
        info = state_to_info(StateEstimate(0, [1.0, 1.0], np.diag([0.5, 0.25])))
        assert np.allclose(info.Z, np.diag([2.0, 4.0]))
        assert np.allclose(info.z_hat, [2.0, 4.0])

    def test_state_to_info_singular_p(self):
        with pytest.raises(SingularityError):
            state_to_info(StateEstimate(0, [1.0, 1.0], np.diag([1.0, 0.0])))


class TestKfRun:
    def test_empty_window_not_representable(self):
        with pytest.raises(ValueError):
            MeasurementWindow(1, np.empty((0, 1)))

    def test_single_measurement_equals_composition(self):
        model = scalar_model(f=0.9, q=0.3)
        init = StateEstimate(0, 0.5, 2.0)
        direct, diag = kf_update(model, 1, kf_predict(model, 1, init), 1.0)
        [(run_est, run_diag)] = kf_run(model, init, MeasurementWindow(1, [1.0]))
        assert np.array_equal(run_est.x_hat, direct.x_hat)
        assert np.array_equal(run_est.P, direct.P)
        assert np.array_equal(run_diag.gain, diag.gain)

    def test_diffuse_start_recovers_sample_mean(self):
        model = scalar_model()
        ys = [1.0, 2.0, 3.0]
        results = kf_run(model, StateEstimate(0, 0.0, 1e12), MeasurementWindow(1, ys))
        assert results[-1][0].x_hat[0] == pytest.approx(np.mean(ys), abs=1e-3)


def _run_both_forms(model, x0, p0, ys):
    """Covariance-form and information-form trajectories side by side."""
    cov = StateEstimate(0, x0, p0)
    info = state_to_info(cov)
    pairs = []
    for k in range(1, ys.shape[0] + 1):
        cov_pred = kf_predict(model, k, cov)
        cov, diag = kf_update(model, k, cov_pred, ys[k - 1])
        info = if_update(model, k, if_predict(model, k, info), ys[k - 1])
        pairs.append((cov, info_to_state(info), diag, cov_pred))
    return pairs


class TestFormEquivalence:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_kf_and_if_agree(self, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng, n=int(rng.integers(1, 4)))
        x0 = rng.standard_normal(model.n)
        p0 = np.eye(model.n) * rng.uniform(0.5, 2.0)
        _, ys = simulate_trajectory(model, SimConfig(seed=seed, steps=40, x0=x0), 0)
        for cov, back, _, _ in _run_both_forms(model, x0, p0, ys):
            assert rel_err(back.x_hat, cov.x_hat) < 1e-8
            assert rel_err(back.P, cov.P) < 1e-7

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_gain_identity_and_orderings(self, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng, n=int(rng.integers(1, 4)))
        x0 = rng.standard_normal(model.n)
        p0 = np.eye(model.n)
        _, ys = simulate_trajectory(model, SimConfig(seed=seed, steps=30, x0=x0), 0)
        info = state_to_info(StateEstimate(0, x0, p0))
        for cov, _, diag, cov_pred in _run_both_forms(model, x0, p0, ys):
            k = cov.index
            # both gain forms agree
            other = kf_gain_posterior_form(cov.P, model.H(k), model.R(k))
            assert np.allclose(other, diag.gain, atol=1e-9)
            # posterior covariance never exceeds the predicted one
            assert np.linalg.eigvalsh(cov_pred.P - cov.P).min() > -1e-9
            # the correction only ever adds information
            info_pred = if_predict(model, k, info)
            info = if_update(model, k, info_pred, ys[k - 1])
            gain_matrix = info.Z - info_pred.Z
            assert np.linalg.eigvalsh(gain_matrix).min() > -1e-9
