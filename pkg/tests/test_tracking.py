import math

import numpy as np
import pytest

from jcrsim.channel import synthesize_rx, add_awgn
from jcrsim.estimation import EstimatorConfig
from jcrsim.frontend import CfarConfig, window
from jcrsim.scenario import PathKind, PathTruth
from jcrsim.tracking import (EkfTrack, ObservationVec, PvTracker, TrackingError,
                             TrackingConfig, coast_step, corrected_observation,
                             demod_amplitude, demod_delay_doppler, ekf_step,
                             jacobian_h, jacobian_h_fd, observe_h,
                             orientation_estimate, predict_range_velocity,
                             push_history, remove_modulated_data_av,
                             transition_matrix, update_beta, default_c_w)
from jcrsim.waveform import (DdQamSymbol, FrameKind, Side, derived_resolutions,
                             pack_bits, qam_constellation)


def make_track(mu, sigma_scale=1.0, params=None, n_s=1):
    c_w = np.diag([0.25, 0.25, (math.pi / 180) ** 2])
    return EkfTrack(mu=np.asarray(mu, float),
                    sigma=sigma_scale * np.eye(4),
                    c_u=np.diag([1e-4, 1e-4, 1e-2, 1e-2]),
                    c_w=c_w, n_s=n_s)


class TestTransition:
    def test_zero_steps_identity(self, table_params):
        assert np.array_equal(transition_matrix(0, table_params), np.eye(4))

    def test_one_frame_displacement(self, table_params):
        f = transition_matrix(1, table_params)
        mu = f @ np.array([0.0, 0.0, 1.0, 2.0])
        assert mu[0] == pytest.approx(7.4274e-3, rel=1e-4)
        assert mu[1] == pytest.approx(1.48548e-2, rel=1e-4)

    def test_composition(self, table_params):
        f1 = transition_matrix(1, table_params)
        f2 = transition_matrix(2, table_params)
        assert np.allclose(f1 @ f1, f2)


class TestOrientation:
    def base_track(self, entries):
        t = make_track([0, 0, 0, 0])
        for frame, x, y in entries:
            t = EkfTrack(mu=np.array([x, y, 0, 0]), sigma=t.sigma, c_u=t.c_u,
                         c_w=t.c_w, n_s=1, history=t.history,
                         orientation=t.orientation)
            t = push_history(t, frame)
        return t

    def test_due_north(self):
        t = self.base_track([(0, 0.0, 0.0), (10, 0.0, 5.0)])
        assert orientation_estimate(t, 10) == pytest.approx(0.0)

    def test_diagonal(self):
        t = self.base_track([(0, 0.0, 0.0), (10, 1.0, 1.0)])
        assert orientation_estimate(t, 10) == pytest.approx(math.pi / 4)

    def test_due_east(self):
        t = self.base_track([(0, 0.0, 0.0), (10, 1.0, 0.0)])
        assert orientation_estimate(t, 10) == pytest.approx(math.pi / 2)

    def test_quadrant_recovery(self):
        t = self.base_track([(0, 0.0, 0.0), (10, 1.0, -1.0)])
        assert orientation_estimate(t, 10) == pytest.approx(3 * math.pi / 4)

    def test_zero_displacement_keeps_previous(self):
        t = self.base_track([(0, 1.0, 1.0), (10, 1.0, 1.0)])
        t = EkfTrack(mu=t.mu, sigma=t.sigma, c_u=t.c_u, c_w=t.c_w, n_s=1,
                     history=t.history, orientation=0.37)
        assert orientation_estimate(t, 10) == 0.37

    def test_short_history_keeps_previous(self):
        t = self.base_track([(0, 0.0, 0.0), (5, 1.0, 1.0)])
        assert orientation_estimate(t, 10) == 0.0


class TestObserveH:
    def test_reference_case(self):
        obs = observe_h(np.array([3.0, 4.0, 0.0, 5.0]), 0.0)
        assert obs.r == pytest.approx(5.0)
        assert obs.theta == pytest.approx(math.asin(0.6))
        assert obs.v_r == pytest.approx(4.0)

    def test_boresight_closing(self):
        obs = observe_h(np.array([0.0, 10.0, 0.0, -2.0]), 0.0)
        assert (obs.r, obs.v_r, obs.theta) == pytest.approx((10.0, -2.0, 0.0))

    def test_branch_continuity(self):
        # consistent (v_x, v_y) for a heading: both branches agree
        speed, theta = 3.0, 0.4
        for o in (math.pi / 4 - 1e-6, math.pi / 4 + 1e-6):
            mu = np.array([5 * math.sin(theta), 5 * math.cos(theta),
                           speed * math.sin(o), speed * math.cos(o)])
            v_r = observe_h(mu, o).v_r
            assert v_r == pytest.approx(speed * math.cos(theta - o), abs=1e-9)

    def test_backward_motion_no_blowup(self):
        mu = np.array([0.0, 10.0, 0.0, -3.0])
        obs = observe_h(mu, math.pi)  # heading straight back
        assert math.isfinite(obs.v_r)
        assert obs.v_r == pytest.approx(-3.0 * math.cos(0.0 - math.pi) / -1.0)

    def test_origin_raises(self):
        with pytest.raises(TrackingError):
            observe_h(np.zeros(4), 0.0)


class TestJacobian:
    def test_dr_dcx(self):
        j = jacobian_h(np.array([3.0, 4.0, 1.0, 2.0]), 0.0)
        assert j[0, 0] == pytest.approx(0.6, abs=1e-9)

    def test_theta_independent_of_velocity(self):
        j = jacobian_h(np.array([3.0, 4.0, 1.0, 2.0]), 0.2)
        assert j[2, 2] == 0.0 and j[2, 3] == 0.0

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            mu = np.array([rng.uniform(-20, 20), rng.uniform(1, 40),
                           rng.uniform(-10, 10), rng.uniform(-10, 10)])
            o = rng.uniform(-1.2, 1.2)
            a = jacobian_h(mu, o)
            b = jacobian_h_fd(mu, o)
            assert np.abs(a - b).max() <= 1e-5


class TestEkfStep:
    def test_huge_noise_ignores_measurement(self, table_params):
        t = make_track([1.0, 8.0, 0.5, -1.0])
        t = EkfTrack(mu=t.mu, sigma=t.sigma, c_u=np.zeros((4, 4)),
                     c_w=1e12 * np.eye(3), n_s=1)
        f = transition_matrix(1, table_params)
        out = ekf_step(t, f, ObservationVec(20.0, 3.0, 0.1), 0.0)
        assert np.allclose(out.mu, f @ t.mu, atol=1e-6)

    def test_small_noise_fixed_point(self, table_params):
        truth = np.array([2.0, 9.0, 0.3, -1.2])
        o = 0.6
        f = transition_matrix(1, table_params)
        obs_true = observe_h(f @ truth, o)
        t = EkfTrack(mu=truth + 1e-4, sigma=np.eye(4), c_u=np.zeros((4, 4)),
                     c_w=1e-14 * np.eye(3), n_s=1)
        out = ekf_step(t, f, obs_true, o)
        got = observe_h(out.mu, o)
        assert abs(got.r - obs_true.r) <= 1e-6
        assert abs(got.theta - obs_true.theta) <= 1e-6

    def test_observed_subspace_never_inflates(self, table_params):
        t = make_track([1.0, 8.0, 0.5, -1.0], sigma_scale=2.0)
        t = EkfTrack(mu=t.mu, sigma=t.sigma, c_u=np.zeros((4, 4)),
                     c_w=t.c_w, n_s=1)
        f = np.eye(4)
        out = ekf_step(t, f, ObservationVec(8.06, -0.9, 0.12), 0.0)
        diff = t.sigma - out.sigma
        assert np.linalg.eigvalsh(diff).min() >= -1e-10

    def test_symmetry_and_psd_long_run(self, table_params):
        rng = np.random.default_rng(21)
        t = make_track([2.0, 10.0, 0.0, 3.0])
        f = transition_matrix(1, table_params)
        for _ in range(10000):
            pred = observe_h(f @ t.mu, 0.0)
            obs = ObservationVec(pred.r + 0.1 * rng.standard_normal(),
                                 pred.v_r + 0.1 * rng.standard_normal(),
                                 pred.theta + 0.01 * rng.standard_normal())
            t = ekf_step(t, f, obs, 0.0)
            assert np.abs(t.sigma - t.sigma.T).max() <= 1e-12
            assert np.linalg.eigvalsh(t.sigma).min() >= -1e-10


class TestPayloadRemoval:
    def test_zero_payload_identity(self, small_params):
        truth = PathTruth(PathKind.ECHO, 6.0, 1.0, 0.1, 0, 0.1, 0, 1 + 0j, 0)
        rx = synthesize_rx(small_params, [truth], DdQamSymbol.empty(),
                           FrameKind.DDM, Side.AV, 1.0)
        out = remove_modulated_data_av(rx, DdQamSymbol.empty())
        assert np.allclose(out.data, rx.data)

    def test_remove_inverts_synthesis(self, small_params):
        p = small_params
        truth = PathTruth(PathKind.ECHO, 6.0, 1.0, 0.1, 0, 0.1, 0, 1 + 0j, 0)
        sym = DdQamSymbol(9, 2, qam_constellation(4)[2])
        with_payload = synthesize_rx(p, [truth], sym, FrameKind.DDM, Side.AV, 1.0)
        cleaned = remove_modulated_data_av(with_payload, sym)
        bare = synthesize_rx(p, [truth], DdQamSymbol.empty(), FrameKind.DDM,
                             Side.AV, 1.0)
        err = np.abs(cleaned.data - bare.data).max()
        assert err <= 1e-10 * np.abs(bare.data).max()

    def test_remove_is_invertible(self, small_params):
        truth = PathTruth(PathKind.ECHO, 6.0, 1.0, 0.1, 0, 0.1, 0, 1 + 0j, 0)
        sym = DdQamSymbol(9, 2, qam_constellation(4)[1])
        rx = synthesize_rx(small_params, [truth], sym, FrameKind.DDM, Side.AV, 1.0)
        back = remove_modulated_data_av(
            remove_modulated_data_av(rx, sym),
            DdQamSymbol(-9 % small_params.n_f, -2 % small_params.n_c,
                        1.0 / sym.beta_d))
        assert np.allclose(back.data, rx.data, rtol=1e-9)


class TestPrediction:
    def test_static_state(self, table_params):
        t = make_track([3.0, 4.0, 0.0, 0.0])
        r_p, v_p = predict_range_velocity(t, table_params)
        assert r_p == pytest.approx(5.0)
        assert v_p == pytest.approx(0.0)

    def test_boresight_closing(self, table_params):
        t = make_track([0.0, 10.0, 0.0, -2.0])
        r_p, v_p = predict_range_velocity(t, table_params)
        dt = table_params.frame_period
        assert r_p == pytest.approx(10.0 - 2.0 * dt, rel=1e-12)
        assert v_p == pytest.approx(-2.0)

    def test_consistency_with_observe_h(self, table_params):
        mu = np.array([4.0, 7.0, 1.5, -2.5])
        t = make_track(mu)
        r_p, v_p = predict_range_velocity(t, table_params)
        adv = transition_matrix(1, table_params) @ mu
        o = math.atan2(adv[2], adv[3])
        obs = observe_h(adv, o)
        assert abs(obs.r - r_p) <= 1e-9
        assert abs(obs.v_r - v_p) <= 1e-9


class TestDemodDelayDoppler:
    def test_reference_values(self, table_params):
        r_res, v_res = derived_resolutions(table_params, Side.PV)
        obs = ObservationVec(10.0 + 5 * r_res, 3.0, 0.0)
        f_r, f_v = demod_delay_doppler(obs, (10.0, 3.0), table_params,
                                       FrameKind.DDM)
        assert (f_r, f_v) == (5, 0)

    def test_zero_differences(self, table_params):
        obs = ObservationVec(10.0, 3.0, 0.0)
        assert demod_delay_doppler(obs, (10.0, 3.0), table_params,
                                   FrameKind.DDM) == (0, 0)

    def test_doppler_wrap(self, table_params):
        _, v_res = derived_resolutions(table_params, Side.PV)
        obs = ObservationVec(10.0, 3.0 - v_res, 0.0)
        _, f_v = demod_delay_doppler(obs, (10.0, 3.0), table_params,
                                     FrameKind.DDM)
        assert f_v == table_params.n_c // table_params.n_tx - 1

    def test_beacon_modulus(self, table_params):
        _, v_res = derived_resolutions(table_params, Side.PV)
        obs = ObservationVec(10.0, 3.0 - v_res, 0.0)
        _, f_v = demod_delay_doppler(obs, (10.0, 3.0), table_params,
                                     FrameKind.BEACON)
        assert f_v == table_params.n_c - 1

    def test_delay_stride_round_trip(self, small_params):
        # modulation interval of 2 resolution cells in the delay dimension
        p = small_params
        r_res, v_res = derived_resolutions(p, Side.PV)
        truth = PathTruth(PathKind.FORWARD, 10 * r_res, 2 * v_res,
                          0.1, 0.0, -0.1, 0.0, 1 + 0j, 1)
        sym = DdQamSymbol(13, 4, qam_constellation(4)[1])
        rx = synthesize_rx(p, [truth], sym, FrameKind.DDM, Side.PV, 1.0,
                           delay_stride=2)
        from jcrsim.frontend import detect_frame
        st, det = detect_frame(rx, window(p.n_f, "hann"), window(p.n_c, "hann"),
                               CfarConfig())
        i_f = int(np.argmax(det.mag.max(axis=1)))
        assert i_f == 10 + 2 * 13
        obs = ObservationVec(i_f * r_res, (2 + 4) * v_res, truth.theta_rx)
        f_r, f_v = demod_delay_doppler(obs, (10 * r_res, 2 * v_res), p,
                                       FrameKind.DDM, delay_stride=2)
        assert (f_r, f_v) == (13, 4)


def _pv_frame(params, sym, truths, amp=1.0, noise=0.0, rng=None):
    rx = synthesize_rx(params, truths, sym, FrameKind.DDM, Side.PV, amp)
    if noise:
        rx = add_awgn(rx, noise, rng)
    from jcrsim.frontend import detect_frame
    w_f, w_c = window(params.n_f, "hann"), window(params.n_c, "hann")
    return detect_frame(rx, w_f, w_c, CfarConfig()), (w_f, w_c)


class TestAmplitudeDemod:
    def setup_frame(self, params, sym):
        r_res, v_res = derived_resolutions(params, Side.PV)
        truth = PathTruth(PathKind.FORWARD, 20 * r_res, 3 * v_res,
                          0.2, 0.05, -0.3, 0.0, 0.004 - 0.003j, 1)
        (st, det), windows = _pv_frame(params, sym, [truth])
        obs = ObservationVec((20 + sym.f_r_d) * r_res,
                             (3 + sym.f_v_d) * v_res, truth.theta_rx)
        angles = (truth.theta_tx, truth.phi_tx, truth.theta_rx, truth.phi_rx)
        return st, obs, angles, truth, windows

    def test_noise_free_exact(self, small_params):
        sym = DdQamSymbol(7, 2, qam_constellation(4)[3])
        st, obs, angles, truth, windows = self.setup_frame(small_params, sym)
        beta_ref = update_beta(st, obs, angles, sym.beta_d, small_params,
                               windows=windows)
        point = demod_amplitude(st, obs, angles, beta_ref, small_params,
                                windows=windows)
        assert point == pytest.approx(sym.beta_d, abs=1e-9)

    def test_pi_phase_error_antipodal(self, small_params):
        sym = DdQamSymbol(7, 2, qam_constellation(4)[0])
        st, obs, angles, truth, windows = self.setup_frame(small_params, sym)
        beta_ref = update_beta(st, obs, angles, sym.beta_d, small_params,
                               windows=windows)
        point = demod_amplitude(st, obs, angles, -beta_ref, small_params,
                                windows=windows)
        assert point == pytest.approx(-sym.beta_d, abs=1e-9)

    def test_update_beta_deterministic(self, small_params):
        sym = DdQamSymbol(7, 2, qam_constellation(4)[3])
        st, obs, angles, truth, windows = self.setup_frame(small_params, sym)
        b1 = update_beta(st, obs, angles, sym.beta_d, small_params, windows=windows)
        b2 = update_beta(st, obs, angles, sym.beta_d, small_params, windows=windows)
        assert b1 == b2
        assert abs(b1) > 0

    def test_zero_beta_prev_raises(self, small_params):
        sym = DdQamSymbol(7, 2, qam_constellation(4)[3])
        st, obs, angles, truth, windows = self.setup_frame(small_params, sym)
        with pytest.raises(TrackingError):
            demod_amplitude(st, obs, angles, 0.0, small_params, windows=windows)

    def test_replica_averaging_reduces_variance(self, small_params):
        """Averaging over n_tx x n_rx entries beats one entry by about that
        factor in decision-variable variance."""
        p = small_params
        sym = DdQamSymbol(7, 2, qam_constellation(4)[3])
        r_res, v_res = derived_resolutions(p, Side.PV)
        truth = PathTruth(PathKind.FORWARD, 20 * r_res, 3 * v_res,
                          0.2, 0.05, -0.3, 0.0, 1.0 + 0j, 1)
        obs = ObservationVec((20 + sym.f_r_d) * r_res,
                             (3 + sym.f_v_d) * v_res, truth.theta_rx)
        angles = (truth.theta_tx, truth.phi_tx, truth.theta_rx, truth.phi_rx)
        full, single = [], []
        for trial in range(150):
            rng = np.random.default_rng(trial)
            (st, det), windows = _pv_frame(p, sym, [truth], noise=10.0, rng=rng)
            raw_full = update_beta(st, obs, angles, 1 + 0j, p, windows=windows)
            vals, _, _ = _gather_single(st, obs, p)
            full.append(raw_full)
            single.append(vals)
        var_ratio = np.var(single) / np.var(full)
        n_entries = p.n_tx * p.n_rx
        assert n_entries / 3 < var_ratio < n_entries * 3


def _gather_single(st, obs, params):
    from jcrsim.tracking import _gather_bins
    vals, d_f, d_c = _gather_bins(st, obs, params, FrameKind.DDM)
    return complex(vals[0, 0]), d_f, d_c


class TestCorrectedObservation:
    def test_wraps_to_prediction(self, table_params):
        r_res, v_res = derived_resolutions(table_params, Side.PV)
        obs = ObservationVec(10.0 + 5 * r_res + 0.1 * r_res,
                             3.0 + 2 * v_res - 0.05 * v_res, 0.1)
        out = corrected_observation(obs, 5, 2, (10.0, 3.0), table_params,
                                    FrameKind.DDM)
        assert out.r == pytest.approx(10.0 + 0.1 * r_res, rel=1e-9)
        assert out.v_r == pytest.approx(3.0 - 0.05 * v_res, rel=1e-9)
        assert out.theta == 0.1


class TestPvLoopback:
    def test_short_noise_free_loopback(self, desk):
        from jcrsim.harness import RunConfig, run_loopback
        cfg = RunConfig(params=desk)
        res = run_loopback(cfg, n_frames=60, noise_power=0.0)
        assert res.detections == 60
        assert res.bit_errors == 0
        assert res.hits == 60

    @pytest.mark.parametrize("n_q", [16, 64])
    def test_higher_qam_orders(self, n_q):
        from jcrsim.harness import RunConfig, run_loopback
        from jcrsim.waveform import desk_params
        cfg = RunConfig(params=desk_params(n_q=n_q))
        res = run_loopback(cfg, n_frames=40, noise_power=0.0)
        assert res.bit_errors == 0
        assert res.amplitude_errors == 0

    def test_payload_free_frames_demod_zero(self, desk):
        from jcrsim.harness import (RunConfig, run_loopback, tx_amplitude,
                                    _forward_truths, _oracle_beta,
                                    _oracle_pv_state)
        from jcrsim.scenario import advance
        cfg = RunConfig(params=desk)
        p = cfg.params
        scene = cfg.scene()
        amp = tx_amplitude(cfg.tx_power_dbm)
        tracker = PvTracker(p, cfg.est, cfg.cfar, cfg.tracking)
        truths, d = _forward_truths(scene, p)
        clean = synthesize_rx(p, truths, DdQamSymbol.empty(), FrameKind.DDM,
                              Side.PV, amp)
        beta0 = _oracle_beta(clean, d, DdQamSymbol.empty(), p, tracker.w_f,
                             tracker.w_c, tracker.windows)
        tracker.init_track(_oracle_pv_state(scene, p), beta0, frame=-1)
        for n in range(5):
            truths, _ = _forward_truths(advance(scene, n), p)
            rx = synthesize_rx(p, truths, DdQamSymbol.empty(), FrameKind.DDM,
                               Side.PV, amp)
            out = tracker.step(n, rx)
            assert out.detected
            assert out.demod.f_r_d == 0
            assert out.demod.f_v_d == 0


class TestPvBeaconAndMiss:
    def _oracle_tracker(self, desk):
        from jcrsim.harness import (RunConfig, tx_amplitude, _forward_truths,
                                    _oracle_beta, _oracle_pv_state)
        cfg = RunConfig(params=desk)
        scene = cfg.scene()
        amp = tx_amplitude(cfg.tx_power_dbm)
        tracker = PvTracker(desk, cfg.est, cfg.cfar, cfg.tracking)
        truths, d = _forward_truths(scene, desk)
        clean = synthesize_rx(desk, truths, DdQamSymbol.empty(), FrameKind.DDM,
                              Side.PV, amp)
        beta0 = _oracle_beta(clean, d, DdQamSymbol.empty(), desk, tracker.w_f,
                             tracker.w_c, tracker.windows)
        tracker.init_track(_oracle_pv_state(scene, desk), beta0, frame=-1)
        return tracker, scene, amp

    def test_beacon_frame_demodulates(self, desk):
        from jcrsim.harness import _forward_truths
        tracker, scene, amp = self._oracle_tracker(desk)
        truths, _ = _forward_truths(scene, desk)
        sym = DdQamSymbol(33, 47, qam_constellation(4)[2])  # beacon Doppler span
        rx = synthesize_rx(desk, truths, sym, FrameKind.BEACON, Side.PV, amp)
        out = tracker.step(0, rx)
        assert out.detected
        assert out.demod.f_r_d == 33
        assert out.demod.f_v_d == 47
        assert out.demod.beta_d == pytest.approx(sym.beta_d, abs=1e-9)

    def test_detection_miss_coasts(self, desk):
        from jcrsim.channel import RxTensor
        tracker, scene, amp = self._oracle_tracker(desk)
        f = transition_matrix(1, desk)
        mu_expect = f @ tracker.track.mu
        rng = np.random.default_rng(0)
        noise_only = RxTensor(
            data=(rng.standard_normal((desk.n_f, desk.n_c, desk.n_rx))
                  + 1j * rng.standard_normal((desk.n_f, desk.n_c, desk.n_rx))),
            side=Side.PV, kind=FrameKind.DDM)
        out = tracker.step(0, noise_only)
        assert not out.detected
        assert out.demod is None
        assert np.allclose(tracker.track.mu, mu_expect)


class TestAvCoast:
    def test_coast_equals_pure_prediction(self, table_params):
        t = make_track([2.0, 9.0, 0.5, -1.0], n_s=10)
        f = transition_matrix(10, table_params)
        out = coast_step(t, f)
        assert np.allclose(out.mu, f @ t.mu)
        assert np.allclose(out.sigma, f @ t.sigma @ f.T + t.c_u)


class TestAvConvergence:
    def test_static_boresight_error_shrinks(self, small_params):
        """Fifty high-SNR fusion steps on a static boresight target: the
        fused position error ends strictly below the first-frame error."""
        from jcrsim.harness import tx_amplitude
        from jcrsim.scenario import Role, Scenario, VehicleState, truth_params
        from jcrsim.tracking import AvTracker
        from jcrsim.waveform import pack_bits, random_payload
        p = small_params
        scene = Scenario(vehicles=(
            VehicleState(1, (0, 0, 1.0), (0, 0, 0), Role.AV),
            VehicleState(2, (0, 10.37, 1.0), (0, 0, 0), Role.PV)),
            frame_period=p.frame_period, rng_seed=3)
        amp = tx_amplitude(5.0)
        trk_cfg = TrackingConfig(n_s_av=1, init_baseline_frames=5)
        tracker = AvTracker(p, EstimatorConfig(varpi_r=3, varpi_v=3),
                            CfarConfig(), trk_cfg)
        rng = np.random.default_rng(4)
        noise = 1e-18  # well below the ~8e-15 echo power: high SNR
        errs = []
        truths = truth_params(scene, 1, PathKind.ECHO, p)
        for frame in range(70):
            pairs = []
            for kind in (FrameKind.BEACON, FrameKind.DDM):
                sym = pack_bits(random_payload(p, kind, rng), p, kind)
                clean = synthesize_rx(p, truths, sym, kind, Side.AV, amp)
                pairs.append((add_awgn(clean, noise, rng), sym))
            logs = tracker.step(frame, pairs[0], pairs[1])
            if logs:
                mu = logs[0].mu
                errs.append(abs(math.hypot(mu[0], mu[1]) - 10.37))
        assert len(errs) >= 50
        assert errs[49] < errs[0]
