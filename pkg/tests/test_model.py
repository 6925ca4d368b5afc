"""Model construction, simulation, mechanisms, and residual recovery."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import varcausal as vc
from helpers import stable_random_model


def _fig2_style_schedule():
    t1 = np.arange(101, 201)
    t2 = np.arange(301, 401)
    return vc.InterventionSchedule([
        vc.clamp(1, 101, 4.0 * np.sin(t1 / 2.0)),
        vc.clamp(2, 301, 4.0 * np.sin(t2 / 2.0)),
    ])


class TestVarModel:
    def test_shapes_validated(self):
        with pytest.raises(vc.ModelError, match="expected 2 coefficient"):
            vc.VarModel(dim=2, lag=2, coeffs=[np.zeros((2, 2))], noise_cov=np.eye(2))
        with pytest.raises(vc.ModelError, match="shape"):
            vc.VarModel(dim=2, lag=1, coeffs=[np.zeros((2, 3))], noise_cov=np.eye(2))

    def test_noise_cov_must_be_symmetric_psd(self):
        with pytest.raises(vc.ModelError, match="symmetric"):
            vc.VarModel(dim=2, lag=1, coeffs=[np.zeros((2, 2))],
                        noise_cov=np.array([[1.0, 0.5], [0.2, 1.0]]))
        with pytest.raises(vc.ModelError, match="positive semidefinite"):
            vc.VarModel(dim=2, lag=1, coeffs=[np.zeros((2, 2))],
                        noise_cov=np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_singular_psd_covariance_accepted(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])  # rank 1
        model = vc.VarModel(dim=2, lag=1, coeffs=[np.zeros((2, 2))], noise_cov=cov)
        factor = model.noise_factor
        assert_allclose(factor @ factor.T, cov, atol=1e-12)

    def test_stacked_layout(self):
        b1 = np.arange(4.0).reshape(2, 2)
        b2 = np.arange(4.0, 8.0).reshape(2, 2)
        model = vc.VarModel(dim=2, lag=2, coeffs=[b1, b2], noise_cov=np.eye(2))
        assert_array_equal(model.stacked, np.hstack([b1, b2]))
        assert_array_equal(model.node_rows(2), np.r_[b1[1], b2[1]])


class TestSimulate:
    def test_zero_dynamics_stay_zero(self):
        model = vc.VarModel(dim=3, lag=2, coeffs=[np.zeros((3, 3))] * 2,
                            noise_cov=np.zeros((3, 3)))
        rec = vc.simulate(model, horizon=20, initial=np.ones((2, 3)), seed=0)
        assert_array_equal(rec.values[2:], np.zeros((18, 3)))

    def test_scalar_geometric_decay(self):
        model = vc.VarModel(dim=1, lag=1, coeffs=[np.array([[0.5]])],
                            noise_cov=np.zeros((1, 1)))
        rec = vc.simulate(model, horizon=12, initial=[[1.0]], seed=0)
        expected = 0.5 ** np.arange(12)
        assert_allclose(rec.values[:, 0], expected, rtol=0, atol=1e-15)

    def test_sinusoidal_clamp_segments(self):
        model = vc.random_model(5, 2, sparsity=0.3, seed=2,
                                noise_cov=vc.toeplitz_covariance(5))
        rec = vc.simulate(model, _fig2_style_schedule(), horizon=500, seed=21)
        t1 = np.arange(101, 201)
        t2 = np.arange(301, 401)
        assert_array_equal(rec.values[100:200, 0], 4.0 * np.sin(t1 / 2.0))
        assert_array_equal(rec.values[300:400, 1], 4.0 * np.sin(t2 / 2.0))
        assert np.max(np.abs(rec.values)) < 50.0

    def test_deterministic_per_seed(self):
        model = vc.random_model(4, 2, seed=9)
        sched = vc.InterventionSchedule([vc.clamp(2, 5, np.ones(4))])
        a = vc.simulate(model, sched, horizon=30, seed=123)
        b = vc.simulate(model, sched, horizon=30, seed=123)
        assert_array_equal(a.values, b.values)
        assert_array_equal(a.noise, b.noise)
        c = vc.simulate(model, sched, horizon=30, seed=124)
        assert not np.array_equal(a.values, c.values)

    def test_window_outside_horizon_rejected(self):
        model = vc.random_model(2, 1, seed=0)
        sched = vc.InterventionSchedule([vc.clamp(1, 5, np.ones(10))])
        with pytest.raises(vc.ScheduleError, match=r"\[5, 14\]"):
            vc.simulate(model, sched, horizon=10, seed=0)

    def test_window_must_start_after_initial_block(self):
        model = vc.random_model(2, 2, seed=0)
        sched = vc.InterventionSchedule([vc.clamp(1, 2, np.ones(3))])
        with pytest.raises(vc.ScheduleError):
            vc.simulate(model, sched, horizon=10, seed=0)

    def test_initial_shape_checked(self):
        model = vc.random_model(2, 2, seed=0)
        with pytest.raises(vc.DataError, match="initial"):
            vc.simulate(model, horizon=10, initial=np.zeros((1, 2)), seed=0)

    def test_seed_or_noise_required(self):
        model = vc.random_model(2, 1, seed=0)
        with pytest.raises(vc.DataError, match="seed"):
            vc.simulate(model, horizon=10)

    def test_noise_override_reproduces_run(self):
        model = vc.random_model(3, 2, seed=5, noise_cov=vc.toeplitz_covariance(3))
        rec = vc.simulate(model, horizon=40, seed=8)
        again = vc.simulate(model, horizon=40, initial=rec.initial,
                            noise=np.array(rec.noise))
        assert_array_equal(again.values, rec.values)


class TestMechanismOutput:
    def setup_method(self):
        self.model = vc.random_model(3, 2, seed=4)
        self.history = np.random.default_rng(1).normal(size=(2, 3))

    def test_identity_modify_matches_plain_assignment(self):
        node = 2
        rows = np.array([self.model.coeffs[0][node - 1], self.model.coeffs[1][node - 1]])
        entry = vc.modify(node, 5, rows=rows, noise_scale=1.0, signal=[0.0])
        w = 0.37
        got = vc.mechanism_output(self.model, entry.mechanism, node, self.history, w, 5)
        plain = float(self.model.node_rows(node) @ self.history.reshape(-1)) + w
        assert got == pytest.approx(plain, abs=1e-15)

    def test_clamp_ignores_history_and_noise(self):
        t = 7
        entry = vc.clamp(1, 7, [4.0 * np.sin(t / 2.0)])
        for w in (0.0, 5.0, -3.2):
            for hist_seed in range(3):
                hist = np.random.default_rng(hist_seed).normal(size=(2, 3)) * 10
                out = vc.mechanism_output(self.model, entry.mechanism, 1, hist, w, t)
                assert out == 4.0 * np.sin(t / 2.0)

    def test_clamped_sine_value_at_quarter_period(self):
        # u(t) = 10 sin(t/2) evaluated where sin hits 1
        t = np.pi
        sig = 10.0 * np.sin(np.array([t]) / 2.0)
        entry = vc.clamp(2, 9, sig)
        out = vc.mechanism_output(self.model, entry.mechanism, 2, self.history, 99.0, 9)
        assert out == pytest.approx(10.0, abs=1e-12)

    def test_node_out_of_range(self):
        entry = vc.clamp(1, 5, [1.0])
        with pytest.raises(vc.DataError, match="out of range"):
            vc.mechanism_output(self.model, entry.mechanism, 7, self.history, 0.0, 5)

    def test_time_outside_window(self):
        entry = vc.clamp(1, 5, [1.0, 2.0])
        with pytest.raises(vc.ScheduleError, match="outside"):
            vc.mechanism_output(self.model, entry.mechanism, 1, self.history, 0.0, 9)


class TestScheduleValidation:
    def test_overlap_rejected_with_clash_names(self):
        with pytest.raises(vc.ScheduleError, match="node 1.*node 2"):
            vc.InterventionSchedule([
                vc.clamp(1, 10, np.ones(10)),
                vc.clamp(2, 15, np.ones(3)),
            ])

    def test_same_node_overlap_rejected(self):
        with pytest.raises(vc.ScheduleError, match="clash"):
            vc.InterventionSchedule([
                vc.clamp(1, 10, np.ones(5)),
                vc.clamp(1, 12, np.ones(5)),
            ])

    def test_touching_windows_allowed(self):
        sched = vc.InterventionSchedule([
            vc.clamp(1, 10, np.ones(5)),
            vc.clamp(2, 15, np.ones(5)),
        ])
        assert len(sched) == 2

    def test_noise_scale_range(self):
        with pytest.raises(vc.ScheduleError, match="noise_scale"):
            vc.modify(1, 5, rows=np.zeros((1, 2)), noise_scale=1.5, signal=[0.0])


class TestClampModifyEquivalence:
    def test_identical_trajectories(self):
        model = vc.random_model(3, 2, seed=11, noise_cov=vc.toeplitz_covariance(3))
        sig = np.linspace(-2, 2, 8)
        as_clamp = vc.InterventionSchedule([vc.clamp(2, 6, sig)])
        as_modify = vc.InterventionSchedule([
            vc.modify(2, 6, rows=np.zeros((2, 3)), noise_scale=0.0, signal=sig)
        ])
        a = vc.simulate(model, as_clamp, horizon=25, seed=3)
        b = vc.simulate(model, as_modify, horizon=25, seed=3)
        assert_array_equal(a.values, b.values)


class TestRecoverResiduals:
    def test_noise_free_residuals_vanish(self):
        model = stable_random_model(3, 2, seed=6, noise_cov=np.zeros((3, 3)))
        rec = vc.simulate(model, horizon=30, initial=np.ones((2, 3)), seed=0)
        resid = vc.recover_residuals(model, rec)
        assert np.all(np.isnan(resid[:2]))
        assert_allclose(resid[2:], 0.0, atol=1e-12)

    def test_zero_coefficients_residual_equals_value(self):
        model = vc.VarModel(dim=2, lag=1, coeffs=[np.zeros((2, 2))],
                            noise_cov=np.eye(2))
        rec = vc.simulate(model, horizon=15, seed=2)
        resid = vc.recover_residuals(model, rec)
        assert_array_equal(resid[1:], rec.values[1:])

    def test_round_trip_against_stored_noise(self):
        model = vc.random_model(4, 2, seed=13, noise_cov=vc.toeplitz_covariance(4))
        rows = np.array([model.coeffs[0][2], model.coeffs[1][2]]) * 0.5
        sched = vc.InterventionSchedule([
            vc.clamp(1, 10, np.ones(6)),
            vc.modify(3, 20, rows=rows, noise_scale=0.5,
                      signal=np.full(5, 0.3)),
        ])
        rec = vc.simulate(model, sched, horizon=60, seed=99)
        resid = vc.recover_residuals(model, rec, sched)
        # clamp destroys its noise; everything else is recovered
        assert np.all(np.isnan(resid[9:15, 0]))
        recoverable = np.isfinite(resid)
        recoverable[: model.lag] = False
        assert np.max(np.abs(resid[recoverable] - rec.noise[recoverable])) <= 1e-12

    def test_resimulation_with_recovered_noise_reproduces_values(self):
        model = vc.random_model(3, 2, seed=8, noise_cov=vc.toeplitz_covariance(3))
        sched = vc.InterventionSchedule([vc.clamp(2, 12, np.full(7, 1.5))])
        rec = vc.simulate(model, sched, horizon=80, seed=5)
        resid = vc.recover_residuals(model, rec, sched)
        again = vc.simulate(model, sched, horizon=80, initial=rec.initial,
                            noise=np.nan_to_num(resid))
        assert np.max(np.abs(again.values - rec.values)) <= 1e-12

    def test_dimension_mismatch(self):
        model = vc.random_model(3, 1, seed=0)
        rec = vc.simulate(vc.random_model(2, 1, seed=0), horizon=10, seed=1)
        with pytest.raises(vc.DataError, match="does not match"):
            vc.recover_residuals(model, rec)


class TestRecording:
    def test_noise_shape_checked(self):
        with pytest.raises(vc.DataError, match="noise shape"):
            vc.Recording(values=np.zeros((5, 2)), noise=np.zeros((5, 3)), lag=1)

    def test_too_short_for_initial_block(self):
        with pytest.raises(vc.DataError, match="initial rows"):
            vc.Recording(values=np.zeros((1, 2)), lag=2)

    def test_initial_block(self):
        rec = vc.Recording(values=np.arange(8.0).reshape(4, 2), lag=2)
        assert_array_equal(rec.initial, [[0.0, 1.0], [2.0, 3.0]])
