"""EKF tracking and the two frame-level procedures built on it.

Active side: payload removal, 4D estimation, gated EKF fusion every
``n_s_av`` frames, plus orientation and tangential velocity from the fused
position history (the fifth parameter).

Passive side: dual compensation. The track prediction compensates the
channel so the payload offsets can be read off the current observation
(delay/Doppler by rounding the prediction residual, amplitude by inverting
the array response against the previous frame's channel estimate); the
demodulated payload is then subtracted from the observation so tracking
sees clean parameters.

The state is [c_x, c_y, v_x, v_y] in the observer's frame (boresight +y).
A planar x-z array cannot observe the sign of c_y, so states are kept on
the c_y >= 0 sheet; all observables are invariant under that mirror.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import RxTensor, rx_positions, steering_vector, tx_positions
from .estimation import (EstimatorConfig, TargetRecord, estimate_4d,
                         record_peak_grid, refine_peak)
from .frontend import CfarConfig, SpectrumTensor, detect_frame, window
from .waveform import (DdQamSymbol, FrameKind, RadarParams, Side,
                       derived_resolutions, nearest_constellation_index,
                       qam_constellation, unpack_bits)


class TrackingError(ValueError):
    pass


@dataclass(frozen=True)
class ObservationVec:
    r: float
    v_r: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.v_r, self.theta])


@dataclass(frozen=True)
class DemodResult:
    f_r_d: int
    f_v_d: int
    beta_d: complex
    bits: str


@dataclass(frozen=True)
class EkfTrack:
    """State mean/covariance plus the noise models and position history."""

    mu: np.ndarray                 # (4,) [c_x, c_y, v_x, v_y]
    sigma: np.ndarray              # (4, 4)
    c_u: np.ndarray                # (4, 4) state perturbation covariance
    c_w: np.ndarray                # (3, 3) observation noise covariance
    n_s: int = 1                   # frames per fusion step
    history: tuple = ()            # ((frame, c_x, c_y), ...)
    orientation: float = 0.0       # last resolved heading, rad from +y

    def __post_init__(self):
        for name, m in (("sigma", self.sigma), ("c_u", self.c_u), ("c_w", self.c_w)):
            if not np.allclose(m, m.T, atol=1e-9):
                raise TrackingError(f"{name} must be symmetric")
        if self.n_s < 1:
            raise TrackingError("n_s must be >= 1")


def _round_half_up(x: float) -> int:
    """Nearest integer, halves away from the origin toward +inf."""
    return int(math.floor(x + 0.5))


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def transition_matrix(n_s: int, params: RadarParams) -> np.ndarray:
    """Constant-velocity transition over n_s whole frames.

    One frame of wall clock is n_c * t_unit; fusion every n_s frames makes
    dt = n_s * n_c * t_unit.
    """
    dt = n_s * params.frame_period
    f = np.eye(4)
    f[0, 2] = dt
    f[1, 3] = dt
    return f


def orientation_estimate(track: EkfTrack, n_o: int) -> float:
    """Heading from the displacement over (at least) n_o frames of history.

    Quadrant-complete: atan2(dx, dy), which reduces to arcsin(dx/|d|) for
    forward motion. Returns the previous orientation when the history is too
    short or the displacement vanishes.
    """
    if len(track.history) < 2:
        return track.orientation
    frame_now, x_now, y_now = track.history[-1]
    past = [h for h in track.history[:-1] if h[0] <= frame_now - n_o]
    if not past:
        return track.orientation
    _, x_old, y_old = past[-1]
    dx, dy = x_now - x_old, y_now - y_old
    if math.hypot(dx, dy) == 0.0:
        return track.orientation
    return math.atan2(dx, dy)


def observe_h(mu: np.ndarray, o: float) -> ObservationVec:
    """Observation function: state -> (range, radial velocity, azimuth).

    The radial velocity reconstruction carries a branch on the orientation so
    no denominator can vanish; the two branches agree identically whenever
    (v_x, v_y) is consistent with the heading o.
    """
    cx, cy, vx, vy = mu
    r = math.hypot(cx, cy)
    if r == 0.0:
        raise TrackingError("observation undefined at the origin")
    theta = math.asin(cx / r)
    so, co = math.sin(o), math.cos(o)
    if abs(so) > abs(co):
        v_r = vx * math.cos(theta - o) / so
    else:
        v_r = vy * math.cos(theta - o) / co
    return ObservationVec(r=r, v_r=v_r, theta=theta)


def jacobian_h(mu: np.ndarray, o: float) -> np.ndarray:
    """Analytic 3x4 Jacobian of observe_h at mu (o held constant)."""
    cx, cy, vx, vy = mu
    r = math.hypot(cx, cy)
    if r == 0.0 or cy == 0.0:
        raise TrackingError("Jacobian undefined on the c_y = 0 axis")
    theta = math.asin(cx / r)
    dth_dx = abs(cy) / r ** 2
    dth_dy = -cx * math.copysign(1.0, cy) / r ** 2

    j = np.zeros((3, 4))
    j[0, 0] = cx / r
    j[0, 1] = cy / r
    j[2, 0] = dth_dx
    j[2, 1] = dth_dy

    so, co = math.sin(o), math.cos(o)
    if abs(so) > abs(co):
        scale = vx / so
        j[1, 2] = math.cos(theta - o) / so
    else:
        scale = vy / co
        j[1, 3] = math.cos(theta - o) / co
    j[1, 0] = -scale * math.sin(theta - o) * dth_dx
    j[1, 1] = -scale * math.sin(theta - o) * dth_dy
    return j


def jacobian_h_fd(mu: np.ndarray, o: float) -> np.ndarray:
    """Central-difference Jacobian with step max(1e-6, 1e-6|x_i|)."""
    j = np.zeros((3, 4))
    for i in range(4):
        h = max(1e-6, 1e-6 * abs(mu[i]))
        hi, lo = mu.copy(), mu.copy()
        hi[i] += h
        lo[i] -= h
        j[:, i] = (observe_h(hi, o).as_array() - observe_h(lo, o).as_array()) / (2 * h)
    return j


def ekf_step(track: EkfTrack, f: np.ndarray, obs: ObservationVec, o: float) -> EkfTrack:
    """One predict + update cycle; the posterior covariance is symmetrized."""
    mu_m = f @ track.mu
    sig_m = f @ track.sigma @ f.T + track.c_u
    jac = jacobian_h(mu_m, o)
    pred = observe_h(mu_m, o)
    innov = np.array([obs.r - pred.r, obs.v_r - pred.v_r,
                      _wrap_angle(obs.theta - pred.theta)])
    s = jac @ sig_m @ jac.T + track.c_w
    try:
        gain = np.linalg.solve(s.T, (sig_m @ jac.T).T).T
    except np.linalg.LinAlgError as exc:
        raise TrackingError("singular innovation covariance") from exc
    mu_p = mu_m + gain @ innov
    sig_p = (np.eye(4) - gain @ jac) @ sig_m
    sig_p = 0.5 * (sig_p + sig_p.T)
    return replace(track, mu=mu_p, sigma=sig_p)


def coast_step(track: EkfTrack, f: np.ndarray) -> EkfTrack:
    """Prediction-only update for frames without a gated detection."""
    return replace(track, mu=f @ track.mu,
                   sigma=f @ track.sigma @ f.T + track.c_u)


def push_history(track: EkfTrack, frame: int, keep: int = 64) -> EkfTrack:
    entry = (frame, float(track.mu[0]), float(track.mu[1]))
    return replace(track, history=(track.history + (entry,))[-keep:])


def tangential_velocity(mu: np.ndarray) -> float:
    """Velocity component orthogonal to the line of sight (fifth parameter)."""
    cx, cy, vx, vy = mu
    r = math.hypot(cx, cy)
    if r == 0.0:
        raise TrackingError("undefined at the origin")
    return vx * cy / r - vy * cx / r


# ---------------------------------------------------------------------------
# Payload compensation

def remove_modulated_data_av(t: RxTensor, sym: DdQamSymbol,
                             *, delay_stride: int = 1) -> RxTensor:
    """Divide out the transmitter's own payload from an echo tensor."""
    n_f, n_c, _ = t.data.shape
    u = np.exp(2j * np.pi * np.arange(n_f) * (delay_stride * sym.f_r_d) / n_f)
    w = np.exp(2j * np.pi * np.arange(n_c) * sym.f_v_d / n_c)
    denom = sym.beta_d * u[:, None, None] * w[None, :, None]
    return RxTensor(data=t.data / denom, side=t.side, kind=t.kind)


def predict_range_velocity(track: EkfTrack, params: RadarParams) -> tuple[float, float]:
    """Range and projected radial velocity one frame ahead of the state."""
    s = transition_matrix(1, params) @ track.mu
    r_p = math.hypot(s[0], s[1])
    if r_p == 0.0:
        raise TrackingError("prediction lands on the origin")
    theta_p = math.asin(s[0] / r_p)
    v_p = s[2] * math.sin(theta_p) + s[3] * math.cos(theta_p)
    return r_p, v_p


def demod_delay_doppler(obs: ObservationVec, pred: tuple[float, float],
                        params: RadarParams, kind: FrameKind,
                        *, delay_stride: int = 1) -> tuple[int, int]:
    """Payload bins from the observation minus the track prediction."""
    r_p, v_p = pred
    r_res, v_res = derived_resolutions(params, Side.PV)
    f_r_d = _round_half_up((obs.r - r_p) / (delay_stride * r_res)) % (params.n_f // 2)
    v_mod = params.n_c if kind is FrameKind.BEACON else params.n_c // params.n_tx
    f_v_d = _round_half_up((obs.v_r - v_p) / v_res) % v_mod
    return f_r_d, f_v_d


def window_response(w: np.ndarray, delta: float) -> complex:
    """Window transform at a fractional bin offset: sum w[n] e^{j2pi n d/N}."""
    n = len(w)
    return complex(np.sum(w * np.exp(2j * np.pi * np.arange(n) * delta / n)))


def _gather_bins(st: SpectrumTensor, obs: ObservationVec, params: RadarParams,
                 kind: FrameKind,
                 tone_hint: tuple[float, float] | None = None,
                 ) -> tuple[np.ndarray, float, float]:
    """Spectrum entries at the rounded cell over the active DDM replicas.

    Returns (values (n_rep, n_rx), delta_f, delta_c) where the deltas are the
    sub-bin offsets of the tone from the gather cell. The cell always comes
    from the observation; the offsets come from ``tone_hint`` (fractional
    bins, e.g. prediction plus demodulated payload) when given, because a
    smoothed prediction is a far quieter offset source than one detection.
    """
    n_f, n_c, _ = st.data.shape
    r_res, v_res = derived_resolutions(params, st.side)
    f_pos = obs.r / r_res
    c_pos = obs.v_r / v_res + n_c / 2
    i_f = _round_half_up(f_pos) % n_f
    i_c = _round_half_up(c_pos) % n_c
    if tone_hint is not None:
        f_pos, c_pos = tone_hint
    d_f = f_pos - _round_half_up(obs.r / r_res)
    d_c = (c_pos - _round_half_up(obs.v_r / v_res + n_c / 2) + n_c / 2) % n_c - n_c / 2
    n_rep = 1 if kind is FrameKind.BEACON else params.n_tx
    cols = (i_c + (n_c // params.n_tx) * np.arange(n_rep)) % n_c
    vals = st.data[i_f, cols, :]
    return vals, d_f, d_c


def _conj_array_response(angles: tuple[float, float, float, float],
                         params: RadarParams, n_rep: int) -> np.ndarray:
    th_tx, ph_tx, th_rx, ph_rx = angles
    a_tx = steering_vector(th_tx, ph_tx, tx_positions(params), params)[:n_rep]
    a_rx = steering_vector(th_rx, ph_rx, rx_positions(params), params)
    return np.conj(np.outer(a_tx, a_rx))


def demod_amplitude(st: SpectrumTensor, obs: ObservationVec,
                    angles: tuple[float, float, float, float],
                    beta_prev: complex, params: RadarParams,
                    *, kind: FrameKind = FrameKind.DDM,
                    windows: tuple[np.ndarray, np.ndarray] | None = None,
                    tone_hint: tuple[float, float] | None = None) -> complex:
    """QAM point carried by the frame's complex amplitude.

    Gathers the detected cell across the DDM replicas, strips the array
    phases with the conjugate response at the estimated angles, averages,
    and normalizes by the previous channel amplitude estimate. When the
    analysis windows are supplied the deterministic leakage factor of the
    sub-bin offset is divided out as well, which keeps the reference valid
    while a moving target drifts across bins.
    """
    if beta_prev == 0:
        raise TrackingError("previous amplitude estimate must be nonzero")
    raw = _demod_gather(st, obs, angles, params, kind, windows, tone_hint)
    const = qam_constellation(params.n_q)
    return complex(const[nearest_constellation_index(raw / beta_prev, const)])


def _demod_gather(st, obs, angles, params, kind, windows, tone_hint=None) -> complex:
    n_rep = 1 if kind is FrameKind.BEACON else params.n_tx
    vals, d_f, d_c = _gather_bins(st, obs, params, kind, tone_hint)
    a_conj = _conj_array_response(angles, params, n_rep)
    raw = complex(np.mean(a_conj * vals))
    if windows is not None:
        w_f, w_c = windows
        leak = (window_response(w_f, d_f) / window_response(w_f, 0.0)
                * window_response(w_c, d_c) / window_response(w_c, 0.0))
        raw /= leak
    return raw


def update_beta(st: SpectrumTensor, obs: ObservationVec,
                angles: tuple[float, float, float, float],
                demod_point: complex, params: RadarParams,
                *, kind: FrameKind = FrameKind.DDM,
                windows: tuple[np.ndarray, np.ndarray] | None = None,
                tone_hint: tuple[float, float] | None = None) -> complex:
    """Refresh the channel amplitude estimate after demodulation."""
    if demod_point == 0:
        raise TrackingError("demodulated point must be nonzero")
    return _demod_gather(st, obs, angles, params, kind, windows, tone_hint) / demod_point


# ---------------------------------------------------------------------------
# Shared configuration

@dataclass
class TrackingConfig:
    n_s_av: int = 10
    n_o: int = 10
    c_u_diag: tuple[float, float, float, float] = (1e-4, 1e-4, 1e-2, 1e-2)
    c_w_diag: tuple[float, float, float] | None = None  # default from resolutions
    gate_r: float = 1.0          # association gate, range resolution units
    gate_v: float = 1.0          # association gate, velocity resolution units
    spawn_gate: float = 3.0      # tentative-to-tentative match, res units
    angle_gate: float = math.radians(10.0)  # passive-side record selection
    sigma0_scale: float = 10.0
    init_baseline_frames: int = 20  # finite-difference velocity baseline
    init_settle_frames: int = 10    # payload-free frames after sensing init
    leakage_correction: bool = True
    subbin_refine: bool = True   # peak-ratio refinement of track observations


def default_c_w(params: RadarParams, side: Side) -> np.ndarray:
    """Observation noise tied to the resolution cells and a 1-degree bearing."""
    r_res, v_res = derived_resolutions(params, side)
    return np.diag([r_res ** 2, v_res ** 2, math.radians(1.0) ** 2])


def _make_c_w(cfg: TrackingConfig, params: RadarParams, side: Side) -> np.ndarray:
    if cfg.c_w_diag is not None:
        return np.diag(list(cfg.c_w_diag))
    return default_c_w(params, side)


def _initial_sigma(r: float, c_w: np.ndarray, dt: float, scale: float) -> np.ndarray:
    # Lift the (r, theta) observation noise into position variance; a
    # finite-difference velocity over baseline dt carries twice the
    # unscaled lift. The baseline must be many frames or the velocity prior
    # (and its coupling into position through the first predict) is useless;
    # inflating the velocity block further makes the first updates erratic.
    lift = c_w[0, 0] + r ** 2 * c_w[2, 2]
    vel_var = 2.0 * lift / dt ** 2
    return np.diag([scale * lift, scale * lift, vel_var, vel_var])


def _oracle_sigma(c_w: np.ndarray) -> np.ndarray:
    # Prior for an externally supplied (near-exact) state: measurement scale.
    return np.diag([c_w[0, 0], c_w[0, 0], c_w[1, 1], c_w[1, 1]])


def _state_from_obs(obs: ObservationVec) -> np.ndarray:
    return np.array([obs.r * math.sin(obs.theta), obs.r * math.cos(obs.theta)])


# ---------------------------------------------------------------------------
# Active-vehicle multi-target tracking (per-frame payload removal + fusion)

@dataclass
class AvTrackState:
    track_id: int
    track: EkfTrack


@dataclass
class AvStepLog:
    frame: int
    track_id: int
    obs: ObservationVec | None        # None when coasting
    mu: np.ndarray
    orientation: float
    v_tan: float
    sigma_min_eig: float


def _gate_nearest(records: list[TargetRecord], used: set[int],
                  r_pred: float, v_pred: float, r_res: float, v_res: float,
                  gate_r: float, gate_v: float) -> int | None:
    best, best_cost = None, None
    for idx, rec in enumerate(records):
        if idx in used:
            continue
        dr = abs(rec.r - r_pred) / r_res
        dv = abs(rec.v - v_pred) / v_res
        if dr <= gate_r and dv <= gate_v:
            cost = dr + dv
            if best_cost is None or cost < best_cost:
                best, best_cost = idx, cost
    return best


def record_observation(rec: TargetRecord, det, params: RadarParams, side: Side,
                       w_f: np.ndarray, w_c: np.ndarray,
                       refine: bool) -> ObservationVec:
    """Track observation from a record, optionally peak-ratio refined.

    The record keeps the plain leakage-averaged values; the refinement
    removes the up-to-half-bin bias an asymmetrically detected cluster
    leaves in them, which matters for payload rounding and fused accuracy.
    """
    if refine and rec.grids:
        f_ref, c_ref = refine_peak(det, record_peak_grid(det, rec), w_f, w_c)
        r_res, v_res = derived_resolutions(params, side)
        n_c = det.mag.shape[1]
        return ObservationVec(f_ref * r_res, (c_ref - n_c / 2) * v_res,
                              rec.theta_rx)
    return ObservationVec(rec.r, rec.v, rec.theta_rx)


def av_track_step(track: EkfTrack, beacon_pair: tuple[RxTensor, DdQamSymbol],
                  ddm_pair: tuple[RxTensor, DdQamSymbol], params: RadarParams,
                  est_cfg: EstimatorConfig, cfar: CfarConfig, trk_cfg: TrackingConfig,
                  frame: int, window_kind: str = "hann",
                  ) -> tuple[EkfTrack, ObservationVec | None]:
    """Single-track fusion step: remove own payload, estimate, gate, fuse.

    Coasts (prediction only) when no record falls inside the gate.
    """
    w_f = window(params.n_f, window_kind)
    w_c = window(params.n_c, window_kind)
    clean_b = remove_modulated_data_av(beacon_pair[0], beacon_pair[1])
    clean_d = remove_modulated_data_av(ddm_pair[0], ddm_pair[1])
    st_det = detect_frame(clean_d, w_f, w_c, cfar)
    records = estimate_4d(detect_frame(clean_b, w_f, w_c, cfar),
                          st_det, params, est_cfg)
    return _fuse_one(track, records, set(), params, trk_cfg, frame,
                     st_det[1], w_f, w_c)


def _fuse_one(track: EkfTrack, records: list[TargetRecord], used: set[int],
              params: RadarParams, trk_cfg: TrackingConfig, frame: int,
              det, w_f, w_c) -> tuple[EkfTrack, ObservationVec | None]:
    r_res, v_res = derived_resolutions(params, Side.AV)
    f = transition_matrix(track.n_s, params)
    o = orientation_estimate(track, trk_cfg.n_o)
    mu_m = f @ track.mu
    pred = observe_h(mu_m, o)
    # Gate thresholds: the configured resolution multiples, widened to the
    # 3-sigma innovation bound while the track covariance is still large
    # (fresh tracks carry an honest finite-difference velocity prior).
    sig_m = f @ track.sigma @ f.T + track.c_u
    jac = jacobian_h(mu_m, o)
    s = jac @ sig_m @ jac.T + track.c_w
    gate_r = max(trk_cfg.gate_r, 3.0 * math.sqrt(max(s[0, 0], 0.0)) / r_res)
    gate_v = max(trk_cfg.gate_v, 3.0 * math.sqrt(max(s[1, 1], 0.0)) / v_res)
    idx = _gate_nearest(records, used, pred.r, pred.v_r, r_res, v_res,
                        gate_r, gate_v)
    if idx is None:
        track = coast_step(track, f)
        track = push_history(track, frame)
        return replace(track, orientation=orientation_estimate(track, trk_cfg.n_o)), None
    used.add(idx)
    rec = records[idx]
    obs = record_observation(rec, det, params, Side.AV, w_f, w_c,
                             trk_cfg.subbin_refine)
    track = ekf_step(track, f, obs, o)
    track = push_history(track, frame)
    track = replace(track, orientation=orientation_estimate(track, trk_cfg.n_o))
    return track, obs


class AvTracker:
    """Multi-target manager: gated fusion plus spawn-on-unassociated-detection.

    Tentative detections are confirmed into tracks by a second detection
    within the spawn gate; velocity comes from the finite difference of the
    two positions. Existing tracks coast through missed frames.
    """

    def __init__(self, params: RadarParams, est_cfg: EstimatorConfig | None = None,
                 cfar: CfarConfig | None = None, trk_cfg: TrackingConfig | None = None,
                 window_kind: str = "hann"):
        self.params = params
        self.est_cfg = est_cfg or EstimatorConfig()
        self.cfar = cfar or CfarConfig()
        self.cfg = trk_cfg or TrackingConfig()
        self.w_f = window(params.n_f, window_kind)
        self.w_c = window(params.n_c, window_kind)
        self.c_w = _make_c_w(self.cfg, params, Side.AV)
        self.c_u = np.diag(list(self.cfg.c_u_diag))
        self.tracks: list[AvTrackState] = []
        self._tentative: list[tuple[int, ObservationVec]] = []
        self._next_id = 1

    def step(self, frame: int, beacon_pair: tuple[RxTensor, DdQamSymbol],
             ddm_pair: tuple[RxTensor, DdQamSymbol]) -> list[AvStepLog]:
        clean_b = remove_modulated_data_av(beacon_pair[0], beacon_pair[1])
        clean_d = remove_modulated_data_av(ddm_pair[0], ddm_pair[1])
        st_det = detect_frame(clean_d, self.w_f, self.w_c, self.cfar)
        records = estimate_4d(detect_frame(clean_b, self.w_f, self.w_c, self.cfar),
                              st_det, self.params, self.est_cfg)
        logs: list[AvStepLog] = []
        used: set[int] = set()
        for ts in self.tracks:
            ts.track, obs = _fuse_one(ts.track, records, used, self.params,
                                      self.cfg, frame, st_det[1], self.w_f,
                                      self.w_c)
            logs.append(AvStepLog(frame, ts.track_id, obs, ts.track.mu.copy(),
                                  ts.track.orientation,
                                  tangential_velocity(ts.track.mu),
                                  float(np.linalg.eigvalsh(ts.track.sigma).min())))
        self._spawn(frame, [records[i] for i in range(len(records)) if i not in used])
        return logs

    def _spawn(self, frame: int, leftovers: list[TargetRecord]) -> None:
        """Tentative bookkeeping: a new detection opens a tentative, matching
        detections refresh it, and once the observations span the velocity
        baseline the tentative is promoted with a finite-difference velocity.

        A velocity differenced over a frame or two is dominated by bearing
        noise, so promotion waits for init_baseline_frames of separation.
        """
        r_res, v_res = derived_resolutions(self.params, Side.AV)
        for rec in leftovers:
            obs = ObservationVec(rec.r, rec.v, rec.theta_rx)
            match = None
            for i, tent in enumerate(self._tentative):
                _, _, _, last = tent
                if (abs(obs.r - last.r) / r_res <= self.cfg.spawn_gate
                        and abs(obs.v_r - last.v_r) / v_res <= self.cfg.spawn_gate):
                    match = i
                    break
            if match is None:
                self._tentative.append((frame, obs, frame, obs))
                continue
            fr0, obs0, _, _ = self._tentative[match]
            self._tentative[match] = (fr0, obs0, frame, obs)
            if frame - fr0 < self.cfg.init_baseline_frames:
                continue
            self._tentative.pop(match)
            dt = (frame - fr0) * self.params.frame_period
            p0, p1 = _state_from_obs(obs0), _state_from_obs(obs)
            mu = np.array([p1[0], p1[1], (p1[0] - p0[0]) / dt, (p1[1] - p0[1]) / dt])
            track = EkfTrack(mu=mu,
                             sigma=_initial_sigma(obs.r, self.c_w, dt,
                                                  self.cfg.sigma0_scale),
                             c_u=self.c_u.copy(), c_w=self.c_w.copy(),
                             n_s=self.cfg.n_s_av)
            track = push_history(push_history(track, fr0), frame)
            self.tracks.append(AvTrackState(self._next_id, track))
            self._next_id += 1
        # Drop tentatives that stopped receiving detections.
        horizon = frame - max(5 * self.cfg.n_s_av,
                              2 * self.cfg.init_baseline_frames)
        self._tentative = [t for t in self._tentative if t[2] > horizon]


# ---------------------------------------------------------------------------
# Passive-vehicle dual-compensation demodulation and tracking

def select_pv_record(records: list[TargetRecord], det, r_p: float, v_p: float,
                     theta_p: float, params: RadarParams, kind: FrameKind,
                     angle_gate: float, payload_free: bool = False) -> TargetRecord | None:
    """Pick the transmitter's record among replica-ambiguous detections.

    Candidates must lie within the bearing gate of the prediction and have a
    velocity residual in the zeroth Doppler replica slot (payload offsets
    stay inside one slot, replica shifts move whole slots). On frames known
    to carry no payload the residual must instead be small outright, which
    tolerates a prediction still settling. Among candidates the strongest
    map peak wins: the line-of-sight path dominates any bounced path and
    any sidelobe fragment.
    """
    _, v_res = derived_resolutions(params, Side.PV)
    n_c = params.n_c
    slot = n_c if kind is FrameKind.BEACON else n_c // params.n_tx
    best, best_peak = None, -1.0
    for rec in records:
        if abs(_wrap_angle(rec.theta_rx - theta_p)) > angle_gate:
            continue
        rho = ((rec.v - v_p) / v_res) % n_c
        if payload_free:
            if abs(_wrap_periodic(rho, n_c)) > slot / 2:
                continue
        elif (_round_half_up(rho) % n_c) // slot != 0:
            continue  # detection of a shifted DDM replica
        peak = max(det.mag[g[0], g[1]] for g in rec.grids) if rec.grids else 0.0
        if peak > best_peak:
            best, best_peak = rec, peak
    return best


def corrected_observation(obs: ObservationVec, f_r_d: int, f_v_d: int,
                          pred: tuple[float, float], params: RadarParams,
                          kind: FrameKind, *, delay_stride: int = 1) -> ObservationVec:
    """Subtract the demodulated payload, wrapping residues onto the prediction."""
    r_p, v_p = pred
    r_res, v_res = derived_resolutions(params, Side.PV)
    period_r = (params.n_f // 2) * delay_stride * r_res
    slot_v = (params.n_c if kind is FrameKind.BEACON
              else params.n_c // params.n_tx) * v_res
    r_c = obs.r - f_r_d * delay_stride * r_res
    r_c = r_p + _wrap_periodic(r_c - r_p, period_r)
    v_c = obs.v_r - f_v_d * v_res
    v_c = v_p + _wrap_periodic(v_c - v_p, slot_v)
    return ObservationVec(r_c, v_c, obs.theta)


@dataclass
class PvStepResult:
    frame: int
    detected: bool
    demod: DemodResult | None
    obs_raw: ObservationVec | None
    obs_corrected: ObservationVec | None
    mu: np.ndarray
    orientation: float
    records: list[TargetRecord]


class PvTracker:
    """Tracks the transmitter's path while demodulating each frame.

    Without a beacon reference every DDM Doppler replica produces a record;
    the transmitter's record is the one whose velocity residual against the
    prediction falls in the zeroth replica slot (temporal continuity plays
    the beacon's role after initialization), further gated by bearing.
    Only that path is fused; other paths surface as raw records.
    """

    def __init__(self, params: RadarParams, est_cfg: EstimatorConfig | None = None,
                 cfar: CfarConfig | None = None, trk_cfg: TrackingConfig | None = None,
                 window_kind: str = "hann"):
        self.params = params
        self.est_cfg = est_cfg or EstimatorConfig()
        self.cfar = cfar or CfarConfig()
        self.cfg = trk_cfg or TrackingConfig()
        self.w_f = window(params.n_f, window_kind)
        self.w_c = window(params.n_c, window_kind)
        self.c_w = _make_c_w(self.cfg, params, Side.PV)
        self.c_u = np.diag(list(self.cfg.c_u_diag))
        self.track: EkfTrack | None = None
        self.beta_hat: complex = 0.0 + 0.0j

    @property
    def windows(self) -> tuple[np.ndarray, np.ndarray] | None:
        if self.cfg.leakage_correction:
            return self.w_f, self.w_c
        return None

    def init_track(self, mu: np.ndarray, beta0: complex, frame: int = 0,
                   sigma: np.ndarray | None = None) -> None:
        """Install a state and channel amplitude (oracle or sensing-stage)."""
        mu = np.asarray(mu, dtype=float).copy()
        if mu[1] < 0:  # keep states on the observable c_y >= 0 sheet
            mu[1], mu[3] = -mu[1], -mu[3]
        if sigma is None:
            sigma = _oracle_sigma(self.c_w)
        track = EkfTrack(mu=mu, sigma=sigma, c_u=self.c_u.copy(),
                         c_w=self.c_w.copy(), n_s=1)
        self.track = push_history(track, frame)
        self.beta_hat = beta0

    def init_from_sensing(self, est1: TargetRecord, est2: TargetRecord,
                          frames: tuple[int, int], st2: SpectrumTensor,
                          det2, det1=None) -> None:
        """Initial channel sensing: two payload-free estimates fix the state
        and the second frame's spectrum fixes the amplitude reference."""
        refine = self.cfg.subbin_refine
        obs1 = record_observation(est1, det1, self.params, Side.PV,
                                  self.w_f, self.w_c, refine and det1 is not None)
        obs2 = record_observation(est2, det2, self.params, Side.PV,
                                  self.w_f, self.w_c, refine)
        dt = (frames[1] - frames[0]) * self.params.frame_period
        if dt <= 0:
            raise TrackingError("sensing frames must be increasing")
        p0, p1 = _state_from_obs(obs1), _state_from_obs(obs2)
        mu = np.array([p1[0], p1[1], (p1[0] - p0[0]) / dt, (p1[1] - p0[1]) / dt])
        angles = est2.angles_at(record_peak_grid(det2, est2))
        beta0 = update_beta(st2, obs2, angles, 1.0 + 0.0j, self.params,
                            kind=st2.kind, windows=self.windows)
        sigma = _initial_sigma(max(obs2.r, 1.0), self.c_w, dt,
                               self.cfg.sigma0_scale)
        self.init_track(mu, beta0, frame=frames[1], sigma=sigma)

    def sense_step(self, frame: int, rx: RxTensor) -> PvStepResult:
        """Track update on a frame known (by schedule) to carry no payload.

        Used to let the filter settle after initialization: the raw refined
        observation feeds the filter directly and the amplitude reference is
        refreshed against a unit symbol, with no payload subtraction whose
        early errors would otherwise feed back into the prediction.
        """
        return self.step(frame, rx, payload_free=True)

    def step(self, frame: int, rx: RxTensor, payload_free: bool = False) -> PvStepResult:
        if self.track is None:
            raise TrackingError("tracker not initialized")
        kind = rx.kind
        st, det = detect_frame(rx, self.w_f, self.w_c, self.cfar)
        est_cfg = self.est_cfg
        if kind is FrameKind.BEACON:
            est_cfg = replace(est_cfg, replicas_required=1)
        records = estimate_4d(None, (st, det), self.params, est_cfg)

        f1 = transition_matrix(1, self.params)
        r_p, v_p = predict_range_velocity(self.track, self.params)
        s_pred = f1 @ self.track.mu
        theta_p = math.asin(s_pred[0] / math.hypot(s_pred[0], s_pred[1]))
        rec = select_pv_record(records, det, r_p, v_p, theta_p, self.params,
                               kind, self.cfg.angle_gate, payload_free)

        if rec is None:
            self.track = push_history(coast_step(self.track, f1), frame)
            return PvStepResult(frame, False, None, None, None,
                                self.track.mu.copy(), self.track.orientation, records)

        obs_raw = record_observation(rec, det, self.params, Side.PV,
                                     self.w_f, self.w_c, self.cfg.subbin_refine)
        angles = rec.angles_at(record_peak_grid(det, rec))
        if payload_free:
            self.beta_hat = update_beta(st, obs_raw, angles, 1.0 + 0.0j,
                                        self.params, kind=kind,
                                        windows=self.windows)
            demod = None
            obs_c = obs_raw
        else:
            f_r_d, f_v_d = demod_delay_doppler(obs_raw, (r_p, v_p),
                                               self.params, kind)
            r_res, v_res = derived_resolutions(self.params, Side.PV)
            hint = (r_p / r_res + f_r_d,
                    (v_p / v_res + f_v_d + self.params.n_c / 2) % self.params.n_c)
            point = demod_amplitude(st, obs_raw, angles, self.beta_hat,
                                    self.params, kind=kind, windows=self.windows,
                                    tone_hint=hint)
            sym = DdQamSymbol(f_r_d, f_v_d, point)
            bits = unpack_bits(sym, self.params, kind)
            self.beta_hat = update_beta(st, obs_raw, angles, point,
                                        self.params, kind=kind,
                                        windows=self.windows, tone_hint=hint)
            demod = DemodResult(f_r_d, f_v_d, point, bits)
            obs_c = corrected_observation(obs_raw, f_r_d, f_v_d, (r_p, v_p),
                                          self.params, kind)

        o = orientation_estimate(self.track, self.cfg.n_o)
        track = ekf_step(self.track, f1, obs_c, o)
        track = push_history(track, frame)
        self.track = replace(track, orientation=orientation_estimate(track, self.cfg.n_o))
        return PvStepResult(frame, True, demod, obs_raw, obs_c,
                            self.track.mu.copy(), self.track.orientation, records)


def pv_demod_track_step(tracker: PvTracker, frame: int, rx: RxTensor,
                        ) -> tuple[EkfTrack, DemodResult | None]:
    """Functional facade over PvTracker.step."""
    result = tracker.step(frame, rx)
    return tracker.track, result.demod


def _wrap_periodic(x: float, period: float) -> float:
    """Map x into (-period/2, period/2]."""
    y = x - period * math.floor(x / period + 0.5)
    return y if y != -period / 2 else period / 2
