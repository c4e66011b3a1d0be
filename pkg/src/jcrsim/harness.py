"""Experiment driver: configuration, metric sweeps, tracking runs, output.

Every runner is a pure function of (config, seed): per-trial randomness comes
from generators seeded by (seed, sweep index, trial index), so results are
reproducible and trials could fan out across workers without changing the
aggregate.

The SNR axis everywhere is per complex sample at a single receive antenna
before any DFT, referenced to the amplitude of the path under test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .channel import add_awgn, normalized_freqs, snr_to_noise_power, synthesize_rx
from .estimation import (EstimatorConfig, estimate_4d, record_peak_grid)
from .frontend import CfarConfig, detect_frame, spectrum, window
from .scenario import (PathKind, Role, Scenario, VehicleState, advance,
                       truth_params)
from .tracking import (AvTracker, ObservationVec, PvTracker, TrackingConfig,
                       corrected_observation, demod_delay_doppler,
                       demod_amplitude, record_observation, select_pv_record,
                       tangential_velocity, update_beta)
from .waveform import (DdQamSymbol, FrameKind, RadarParams, Side,
                       default_params, derived_resolutions, desk_params,
                       make_params, pack_bits, random_payload, unpack_bits)


class HarnessError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration

def nominal_vehicles() -> tuple[VehicleState, ...]:
    """Three-vehicle street scene: transmitter, receiver, one scatterer."""
    return (
        VehicleState(1, (0.0, 0.0, 1.0), (0.0, 20.0, 0.0), Role.AV),
        VehicleState(2, (-5.0, 5.0, 1.0), (0.0, 25.0, 0.0), Role.PV),
        VehicleState(3, (5.0, -10.0, 1.0), (0.0, 30.0, 0.0), Role.OTHER),
    )


@dataclass
class SweepConfig:
    snr_db: tuple[float, ...] = (-30.0, -26.0, -22.0, -18.0, -14.0)
    trials: int = 1000

    def __post_init__(self):
        if self.trials < 1:
            raise HarnessError("trials must be >= 1")
        if not self.snr_db:
            raise HarnessError("snr list must be nonempty")


@dataclass
class RateConfig:
    scheme: str = "ddm"            # ddm | tdm | qam-only
    n_f: int = 16
    n_c: int = 8
    n_tx: int = 2
    n_q: int = 4
    samples: int = 400
    snr_db: tuple[float, ...] = tuple(range(-30, 11, 4))
    channel_draws: int = 1


def _default_estimator() -> EstimatorConfig:
    # Association threshold 3: a near-half-bin tone detects a 4-cell-wide
    # leakage cluster per axis (16 cells in 2D) whose tail cells sit over
    # 2 bins from the row-major running mean; the literal threshold of 1
    # fragments such clusters and biases their averages by up to a bin.
    # Three bins still separates anything one DDM replica slot apart.
    return EstimatorConfig(varpi_r=3.0, varpi_v=3.0)


@dataclass
class RunConfig:
    params: RadarParams = field(default_factory=desk_params)
    vehicles: tuple[VehicleState, ...] = field(default_factory=nominal_vehicles)
    est: EstimatorConfig = field(default_factory=_default_estimator)
    cfar: CfarConfig = field(default_factory=CfarConfig)
    tracking: TrackingConfig = field(default_factory=TrackingConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    rate: RateConfig = field(default_factory=RateConfig)
    seed: int = 1
    window_kind: str = "hann"
    tx_power_dbm: float = 5.0
    noise_psd_dbm_hz: float = -174.0
    n_frames: int = 220
    track_side: str = "av"
    scene_offset_frames: int = 0

    def scene(self) -> Scenario:
        base = Scenario(vehicles=self.vehicles,
                        frame_period=self.params.frame_period,
                        rng_seed=self.seed)
        return advance(base, self.scene_offset_frames)


def tx_amplitude(power_dbm: float) -> float:
    return math.sqrt(10.0 ** ((power_dbm - 30.0) / 10.0))


def physical_noise_power(params: RadarParams, psd_dbm_hz: float) -> float:
    """Per-sample noise power from a spectral density over the ADC bandwidth."""
    return 10.0 ** ((psd_dbm_hz - 30.0) / 10.0) * params.f_s


def load_config(path: str) -> RunConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    cfg = RunConfig()
    rd = raw.get("radar", {})
    if rd:
        base = default_params() if rd.pop("profile", "default") == "default" \
            else desk_params()
        keys = dict(f_c=base.f_c, bandwidth=base.bandwidth, f_s=base.f_s,
                    t_c=base.t_c, t_chirp=base.t_chirp, t_gap=base.t_gap,
                    n_c=base.n_c, n_tx_a=base.n_tx_a, n_tx_e=base.n_tx_e,
                    n_rx_a=base.n_rx_a, n_rx_e=base.n_rx_e,
                    theta_max=base.theta_max, phi_max=base.phi_max, n_q=base.n_q)
        for k in ("theta_max_deg", "phi_max_deg"):
            if k in rd:
                keys[k[:-4]] = math.radians(rd.pop(k))
        keys.update({k: rd[k] for k in keys if k in rd})
        cfg = replace(cfg, params=make_params(**keys))
    if "scenario" in raw:
        vs = []
        for v in raw["scenario"].get("vehicles", []):
            vs.append(VehicleState(int(v["id"]), tuple(v["position"]),
                                   tuple(v["velocity"]), Role(v["role"])))
        if vs:
            cfg = replace(cfg, vehicles=tuple(vs))
        if "offset_frames" in raw["scenario"]:
            cfg = replace(cfg, scene_offset_frames=int(raw["scenario"]["offset_frames"]))
    if "cfar" in raw:
        c = raw["cfar"]
        cfg = replace(cfg, cfar=CfarConfig(
            pfa=c.get("pfa", 1e-3),
            train=tuple(c.get("train", (8, 4))),
            guard=tuple(c.get("guard", (2, 2)))))
    if "estimator" in raw:
        e = raw["estimator"]
        cfg = replace(cfg, est=EstimatorConfig(
            varpi_r=e.get("varpi_r", 1.0), varpi_v=e.get("varpi_v", 1.0),
            angle_grid_step=math.radians(e.get("angle_grid_step_deg", 1.0)),
            replicas_required=e.get("replicas_required")))
    if "tracking" in raw:
        t = raw["tracking"]
        trk = TrackingConfig(
            n_s_av=t.get("n_s_av", 10), n_o=t.get("n_o", 10),
            gate_r=t.get("gate_r", 1.0), gate_v=t.get("gate_v", 1.0),
            angle_gate=math.radians(t.get("angle_gate_deg", 10.0)))
        if "c_u_diag" in t:
            trk.c_u_diag = tuple(t["c_u_diag"])
        if "c_w_diag" in t:
            trk.c_w_diag = tuple(t["c_w_diag"])
        cfg = replace(cfg, tracking=trk)
    if "sweep" in raw:
        s = raw["sweep"]
        cfg = replace(cfg, sweep=SweepConfig(
            snr_db=tuple(s.get("snr_db", cfg.sweep.snr_db)),
            trials=s.get("trials", cfg.sweep.trials)))
    if "rate" in raw:
        r = raw["rate"]
        cfg = replace(cfg, rate=RateConfig(
            scheme=r.get("scheme", "ddm"), n_f=r.get("n_f", 16),
            n_c=r.get("n_c", 8), n_tx=r.get("n_tx", 2), n_q=r.get("n_q", 4),
            samples=r.get("samples", 400),
            snr_db=tuple(r.get("snr_db", RateConfig.snr_db)),
            channel_draws=r.get("channel_draws", 1)))
    for k in ("seed", "window_kind", "tx_power_dbm", "noise_psd_dbm_hz",
              "n_frames", "track_side"):
        if k in raw:
            cfg = replace(cfg, **{k: raw[k]})
    return cfg


# ---------------------------------------------------------------------------
# Metrics

def is_hit(est: tuple[float, float], truth: tuple[float, float],
           res: tuple[float, float]) -> bool:
    """Both range and velocity errors within one resolution cell (inclusive)."""
    return (abs(est[0] - truth[0]) <= res[0]
            and abs(est[1] - truth[1]) <= res[1])


@dataclass
class MetricRow:
    snr_db: float
    trials: int
    detections: int
    hits: int
    symbol_errors: int
    ser: float
    hitrate: float
    ser_delay: float
    ser_doppler: float
    ser_amplitude: float
    err_r_p50: float | None = None
    err_r_p90: float | None = None
    err_v_p50: float | None = None
    err_v_p90: float | None = None
    err_theta_p50: float | None = None
    err_theta_p90: float | None = None


def _percentiles(errs: list[float]) -> tuple[float | None, float | None]:
    if not errs:
        return None, None
    return (float(np.percentile(errs, 50)), float(np.percentile(errs, 90)))


def cdf_extract(errors, grid) -> list[tuple[float, float]]:
    """Right-continuous empirical CDF sampled on the given grid."""
    errors = np.asarray(list(errors), dtype=float)
    if errors.size == 0:
        raise HarnessError("cdf of an empty sample")
    return [(float(x), float(np.mean(errors <= x))) for x in grid]


# ---------------------------------------------------------------------------
# Passive-side symbol-error sweep (frozen scene, oracle-initialized track)

def _forward_truths(scene: Scenario, params: RadarParams):
    pv = next(v for v in scene.vehicles if v.role is Role.PV)
    truths = truth_params(scene, pv.id, PathKind.FORWARD, params)
    direct = [t for t in truths if t.target_id == scene.the_av().id]
    if not direct:
        raise HarnessError("direct transmitter path is outside the field of view")
    return truths, direct[0]


def _wrapped_velocity(v: float, params: RadarParams, side: Side) -> float:
    """Fold a radial velocity into the unambiguous span of the Doppler axis."""
    _, v_res = derived_resolutions(params, side)
    n_c = params.n_c
    bins = (v / v_res + n_c / 2) % n_c - n_c / 2
    return bins * v_res


def _oracle_beta(clean, truths_direct, sym, params, w_f, w_c, windows):
    """Channel amplitude reference the tracker would carry into this frame."""
    st0 = spectrum(clean, w_f, w_c)
    r_res, v_res = derived_resolutions(params, Side.PV)
    nf = normalized_freqs(truths_direct, params, Side.PV)
    tone = (nf.f_r + sym.f_r_d, (nf.f_v + sym.f_v_d + params.n_c / 2) % params.n_c)
    tot_v = tone[1] - params.n_c / 2
    obs = ObservationVec(tone[0] * r_res, tot_v * v_res, truths_direct.theta_rx)
    angles = (truths_direct.theta_tx, truths_direct.phi_tx,
              truths_direct.theta_rx, truths_direct.phi_rx)
    return update_beta(st0, obs, angles, sym.beta_d, params,
                       kind=FrameKind.DDM, windows=windows, tone_hint=tone)


def run_ser_sweep(cfg: RunConfig) -> list[MetricRow]:
    """Symbol error rate of the passive demodulator vs per-sample SNR.

    The scene is frozen at its initial state; each trial draws a fresh
    payload and noise. Prediction and amplitude reference are oracle (truth
    derived), isolating demodulation from track transients. A detection miss
    errs all three payload dimensions. Hits are counted on the corrected
    observation so every row carries the paired hitrate.
    """
    params = cfg.params
    scene = cfg.scene()
    truths, direct = _forward_truths(scene, params)
    w_f, w_c = window(params.n_f, cfg.window_kind), window(params.n_c, cfg.window_kind)
    windows = (w_f, w_c) if cfg.tracking.leakage_correction else None
    amp = tx_amplitude(cfg.tx_power_dbm)
    r_res, v_res = derived_resolutions(params, Side.PV)
    v_truth = _wrapped_velocity(direct.v_r, params, Side.PV)
    kind = FrameKind.DDM
    rows = []
    for si, snr in enumerate(sorted(cfg.sweep.snr_db)):
        det = hits = e_delay = e_dopp = e_amp = 0
        err_r, err_v, err_th = [], [], []
        for trial in range(cfg.sweep.trials):
            rng = np.random.default_rng([cfg.seed, 1000 + si, trial])
            bits = random_payload(params, kind, rng)
            sym = pack_bits(bits, params, kind)
            clean = synthesize_rx(params, truths, sym, kind, Side.PV, amp)
            beta_ref = _oracle_beta(clean, direct, sym, params, w_f, w_c, windows)
            noise = snr_to_noise_power(snr, amp * abs(direct.beta_h))
            st, detm = detect_frame(add_awgn(clean, noise, rng), w_f, w_c, cfg.cfar)
            records = estimate_4d(None, (st, detm), params, cfg.est)
            rec = select_pv_record(records, detm, direct.r, v_truth,
                                   direct.theta_rx, params, kind,
                                   cfg.tracking.angle_gate)
            if rec is None:
                e_delay += 1
                e_dopp += 1
                e_amp += 1
                continue
            det += 1
            obs = record_observation(rec, detm, params, Side.PV, w_f, w_c,
                                     cfg.tracking.subbin_refine)
            f_r_hat, f_v_hat = demod_delay_doppler(obs, (direct.r, v_truth),
                                                   params, kind)
            angles = rec.angles_at(record_peak_grid(detm, rec))
            hint = (direct.r / r_res + f_r_hat,
                    (v_truth / v_res + f_v_hat + params.n_c / 2) % params.n_c)
            point = demod_amplitude(st, obs, angles, beta_ref, params,
                                    kind=kind, windows=windows, tone_hint=hint)
            if f_r_hat != sym.f_r_d:
                e_delay += 1
            if f_v_hat != sym.f_v_d:
                e_dopp += 1
            if abs(point - sym.beta_d) > 1e-9:
                e_amp += 1
            corr = corrected_observation(obs, f_r_hat, f_v_hat,
                                         (direct.r, v_truth), params, kind)
            if is_hit((corr.r, corr.v_r), (direct.r, v_truth), (r_res, v_res)):
                hits += 1
            err_r.append(abs(corr.r - direct.r))
            err_v.append(abs(corr.v_r - v_truth))
            err_th.append(abs(obs.theta - direct.theta_rx))
        n = cfg.sweep.trials
        sym_err = max(e_delay, e_dopp, e_amp)
        p50r, p90r = _percentiles(err_r)
        p50v, p90v = _percentiles(err_v)
        p50t, p90t = _percentiles(err_th)
        rows.append(MetricRow(snr, n, det, hits, sym_err, sym_err / n, hits / n,
                              e_delay / n, e_dopp / n, e_amp / n,
                              p50r, p90r, p50v, p90v, p50t, p90t))
    return rows


# ---------------------------------------------------------------------------
# Active-side hitrate sweep (echo pipeline)

def run_hitrate_sweep(cfg: RunConfig) -> list[MetricRow]:
    """Hitrate of the active vehicle's 4D estimation of the receiver vehicle."""
    params = cfg.params
    scene = cfg.scene()
    av = scene.the_av()
    pv = next(v for v in scene.vehicles if v.role is Role.PV)
    truths = truth_params(scene, av.id, PathKind.ECHO, params)
    target = next(t for t in truths if t.target_id == pv.id)
    w_f, w_c = window(params.n_f, cfg.window_kind), window(params.n_c, cfg.window_kind)
    amp = tx_amplitude(cfg.tx_power_dbm)
    r_res, v_res = derived_resolutions(params, Side.AV)
    v_truth = _wrapped_velocity(target.v_r, params, Side.AV)
    rows = []
    from .tracking import remove_modulated_data_av
    for si, snr in enumerate(sorted(cfg.sweep.snr_db)):
        det = hits = 0
        err_r, err_v, err_th = [], [], []
        for trial in range(cfg.sweep.trials):
            rng = np.random.default_rng([cfg.seed, 2000 + si, trial])
            sym_b = pack_bits(random_payload(params, FrameKind.BEACON, rng),
                              params, FrameKind.BEACON)
            sym_d = pack_bits(random_payload(params, FrameKind.DDM, rng),
                              params, FrameKind.DDM)
            noise = snr_to_noise_power(snr, amp * abs(target.beta_h))
            frames = []
            for sym, kind in ((sym_b, FrameKind.BEACON), (sym_d, FrameKind.DDM)):
                clean = synthesize_rx(params, truths, sym, kind, Side.AV, amp)
                noisy = add_awgn(clean, noise, rng)
                frames.append(detect_frame(remove_modulated_data_av(noisy, sym),
                                           w_f, w_c, cfg.cfar))
            records = estimate_4d(frames[0], frames[1], params, cfg.est)
            best, cost = None, None
            for rec in records:
                c = abs(rec.r - target.r) / r_res + abs(rec.v - v_truth) / v_res
                if cost is None or c < cost:
                    best, cost = rec, c
            if best is None or cost > 6.0:
                continue
            det += 1
            if is_hit((best.r, best.v), (target.r, v_truth), (r_res, v_res)):
                hits += 1
            err_r.append(abs(best.r - target.r))
            err_v.append(abs(best.v - v_truth))
            err_th.append(abs(best.theta_rx - target.theta_rx))
        n = cfg.sweep.trials
        p50r, p90r = _percentiles(err_r)
        p50v, p90v = _percentiles(err_v)
        p50t, p90t = _percentiles(err_th)
        rows.append(MetricRow(snr, n, det, hits, n - hits, (n - hits) / n,
                              hits / n, (n - hits) / n, (n - hits) / n,
                              (n - hits) / n, p50r, p90r, p50v, p90v, p50t, p90t))
    return rows


# ---------------------------------------------------------------------------
# Noise-free / noisy demodulation loopback over an evolving scene

@dataclass
class LoopbackResult:
    frames: int
    detections: int
    bit_errors: int
    delay_errors: int
    doppler_errors: int
    amplitude_errors: int
    hits: int
    range_errors: list[float]
    velocity_errors: list[float]


def _oracle_pv_state(scene: Scenario, params: RadarParams) -> np.ndarray:
    av, pv = scene.the_av(), next(v for v in scene.vehicles if v.role is Role.PV)
    dp = scene.position_of(av) - scene.position_of(pv)
    dv = np.asarray(av.velocity) - np.asarray(pv.velocity)
    return np.array([dp[0], dp[1], dv[0], dv[1]])


def run_loopback(cfg: RunConfig, n_frames: int | None = None,
                 noise_power: float = 0.0) -> LoopbackResult:
    """Stream DDM frames with random payloads through the full PV chain.

    The track and channel amplitude are oracle-initialized from the frame-0
    scene; afterwards the tracker runs on its own estimates.
    """
    params = cfg.params
    n_frames = n_frames if n_frames is not None else cfg.n_frames
    scene0 = cfg.scene()
    pv = next(v for v in scene0.vehicles if v.role is Role.PV)
    amp = tx_amplitude(cfg.tx_power_dbm)
    tracker = PvTracker(params, cfg.est, cfg.cfar, cfg.tracking, cfg.window_kind)
    w_f, w_c = tracker.w_f, tracker.w_c

    truths0, direct0 = _forward_truths(scene0, params)
    clean0 = synthesize_rx(params, truths0, DdQamSymbol.empty(), FrameKind.DDM,
                           Side.PV, amp)
    beta0 = _oracle_beta(clean0, direct0, DdQamSymbol.empty(), params, w_f, w_c,
                         tracker.windows)
    tracker.init_track(_oracle_pv_state(scene0, params), beta0, frame=-1)

    r_res, v_res = derived_resolutions(params, Side.PV)
    payload_rng = np.random.default_rng([cfg.seed, 7])
    res = LoopbackResult(n_frames, 0, 0, 0, 0, 0, 0, [], [])
    for n in range(n_frames):
        scene = advance(scene0, n)
        truths, direct = _forward_truths(scene, params)
        bits = random_payload(params, FrameKind.DDM, payload_rng)
        sym = pack_bits(bits, params, FrameKind.DDM)
        rx = synthesize_rx(params, truths, sym, FrameKind.DDM, Side.PV, amp)
        if noise_power > 0:
            rx = add_awgn(rx, noise_power, np.random.default_rng([cfg.seed, 8, n]))
        out = tracker.step(n, rx)
        if not out.detected:
            res.delay_errors += 1
            res.doppler_errors += 1
            res.amplitude_errors += 1
            res.bit_errors += len(bits)
            continue
        res.detections += 1
        res.bit_errors += sum(a != b for a, b in zip(bits, out.demod.bits))
        res.delay_errors += out.demod.f_r_d != sym.f_r_d
        res.doppler_errors += out.demod.f_v_d != sym.f_v_d
        res.amplitude_errors += abs(out.demod.beta_d - sym.beta_d) > 1e-9
        v_truth = _wrapped_velocity(direct.v_r, params, Side.PV)
        err_r = abs(out.obs_corrected.r - direct.r)
        err_v = abs(out.obs_corrected.v_r - v_truth)
        res.range_errors.append(err_r)
        res.velocity_errors.append(err_v)
        res.hits += is_hit((out.obs_corrected.r, out.obs_corrected.v_r),
                           (direct.r, v_truth), (r_res, v_res))
    return res


# ---------------------------------------------------------------------------
# Tracking runs

def _relative_truth(scene: Scenario, obs_id: int, tgt_id: int):
    """Raw relative geometry, no field-of-view culling (for logging)."""
    obs, tgt = scene.vehicle(obs_id), scene.vehicle(tgt_id)
    dp = scene.position_of(tgt) - scene.position_of(obs)
    dv = np.asarray(tgt.velocity) - np.asarray(obs.velocity)
    r = float(np.linalg.norm(dp))
    ground = math.hypot(dp[0], dp[1])
    theta = math.asin(dp[0] / ground) if ground > 0 else 0.0
    v_r = float(np.dot(dp, dv) / r) if r > 0 else 0.0
    orient = math.atan2(dv[0], dv[1]) if math.hypot(dv[0], dv[1]) > 0 else 0.0
    return dp, dv, r, v_r, theta, orient


def run_tracking(cfg: RunConfig) -> list[dict]:
    """Frame-by-frame track log for the configured side.

    Active side: beacon + DDM pair per fusion step, own payload removed,
    multi-target fusion. Passive side: payload-free sensing stage then a DDM
    demodulation stream tracking the transmitter path. One row per frame and
    target; truth columns are always filled, observation/fusion columns stay
    empty without a gated detection.
    """
    if cfg.track_side == "av":
        return _run_tracking_av(cfg)
    if cfg.track_side == "pv":
        return _run_tracking_pv(cfg)
    raise HarnessError(f"unknown track side {cfg.track_side!r}")


def _noise(cfg: RunConfig) -> float:
    return physical_noise_power(cfg.params, cfg.noise_psd_dbm_hz)


def _run_tracking_av(cfg: RunConfig) -> list[dict]:
    params = cfg.params
    scene0 = cfg.scene()
    av = scene0.the_av()
    amp = tx_amplitude(cfg.tx_power_dbm)
    noise = _noise(cfg)
    tracker = AvTracker(params, cfg.est, cfg.cfar, cfg.tracking, cfg.window_kind)
    rows: list[dict] = []
    n_s = cfg.tracking.n_s_av
    for k in range(cfg.n_frames // n_s):
        frame = k * n_s
        scene = advance(scene0, frame)
        truths = truth_params(scene, av.id, PathKind.ECHO, params)
        rng = np.random.default_rng([cfg.seed, 3, frame])
        pairs = []
        for kind in (FrameKind.BEACON, FrameKind.DDM):
            sym = pack_bits(random_payload(params, kind, rng), params, kind)
            clean = synthesize_rx(params, truths, sym, kind, Side.AV, amp)
            pairs.append((add_awgn(clean, noise, rng), sym))
        logs = tracker.step(frame, pairs[0], pairs[1])
        rows.extend(_av_rows(cfg, scene, frame, logs))
    return rows


def _av_rows(cfg, scene, frame, logs) -> list[dict]:
    av = scene.the_av()
    rows = []
    for tgt in scene.vehicles:
        if tgt.id == av.id:
            continue
        dp, dv, r, v_r, theta, orient = _relative_truth(scene, av.id, tgt.id)
        # Tracks live on the observable c_y >= 0 sheet; mirror the truth of
        # behind targets so association and velocity errors are meaningful.
        mirror = -1.0 if dp[1] < 0 else 1.0
        row = {"frame": frame, "target_id": tgt.id,
               "r_true": r, "v_true": v_r, "theta_true": theta,
               "orient_true": math.atan2(dv[0], mirror * dv[1]),
               "vx_true": float(dv[0]), "vy_true": float(mirror * dv[1]),
               "r_obs": None, "v_obs": None, "theta_obs": None,
               "r_fused": None, "v_fused": None, "theta_fused": None,
               "orient_est": None, "vx_est": None, "vy_est": None,
               "v_tan_est": None, "track_id": None, "sigma_min_eig": None,
               "demod_bits": "", "symbol_ok": ""}
        best, dist = None, None
        for log in logs:
            d = math.hypot(log.mu[0] - dp[0], log.mu[1] - mirror * dp[1])
            if dist is None or d < dist:
                best, dist = log, d
        if best is not None and dist is not None and dist < 2.0:
            row["track_id"] = best.track_id
            if best.obs is not None:
                row.update(r_obs=best.obs.r, v_obs=best.obs.v_r,
                           theta_obs=best.obs.theta)
            mu = best.mu
            rr = math.hypot(mu[0], mu[1])
            row.update(r_fused=rr, v_fused=(mu[2] * mu[0] + mu[3] * mu[1]) / rr,
                       theta_fused=math.asin(mu[0] / rr),
                       orient_est=best.orientation, vx_est=float(mu[2]),
                       vy_est=float(mu[3]), v_tan_est=best.v_tan,
                       sigma_min_eig=best.sigma_min_eig)
        rows.append(row)
    return rows


def _run_tracking_pv(cfg: RunConfig) -> list[dict]:
    params = cfg.params
    scene0 = cfg.scene()
    av = scene0.the_av()
    pv = next(v for v in scene0.vehicles if v.role is Role.PV)
    amp = tx_amplitude(cfg.tx_power_dbm)
    noise = _noise(cfg)
    tracker = PvTracker(params, cfg.est, cfg.cfar, cfg.tracking, cfg.window_kind)

    # Initial channel sensing: two payload-free beacon+DDM pairs separated by
    # the velocity baseline (a finite-difference velocity over a frame or two
    # is dominated by bearing noise); the demodulation stream follows.
    baseline = max(2, cfg.tracking.init_baseline_frames)
    ests, pipes, est_frames = [], [], []
    for frame in (0, baseline):
        scene = advance(scene0, frame)
        truths = truth_params(scene, pv.id, PathKind.FORWARD, params)
        rng = np.random.default_rng([cfg.seed, 4, frame])
        dets = []
        for kind in (FrameKind.BEACON, FrameKind.DDM):
            clean = synthesize_rx(params, truths, DdQamSymbol.empty(), kind,
                                  Side.PV, amp)
            dets.append(detect_frame(add_awgn(clean, noise, rng),
                                     tracker.w_f, tracker.w_c, cfg.cfar))
        records = estimate_4d(dets[0], dets[1], params, cfg.est)
        if not records:
            raise HarnessError("initial channel sensing found no path")
        rec = max(records, key=lambda r: max(dets[1][1].mag[g] for g in r.grids))
        ests.append(rec)
        pipes.append(dets[1])
        est_frames.append(frame)
    tracker.init_from_sensing(ests[0], ests[1], (est_frames[0], est_frames[1]),
                              pipes[1][0], pipes[1][1], det1=pipes[0][1])

    # Payload-free settling frames let the filter converge before the
    # demodulation feedback loop starts.
    settle = cfg.tracking.init_settle_frames
    for n in range(baseline + 1, baseline + 1 + settle):
        scene = advance(scene0, n)
        truths = truth_params(scene, pv.id, PathKind.FORWARD, params)
        clean = synthesize_rx(params, truths, DdQamSymbol.empty(), FrameKind.DDM,
                              Side.PV, amp)
        rx = add_awgn(clean, noise, np.random.default_rng([cfg.seed, 6, n]))
        tracker.sense_step(n, rx)

    payload_rng = np.random.default_rng([cfg.seed, 5])
    rows: list[dict] = []
    start = baseline + 1 + settle
    for n in range(start, start + cfg.n_frames):
        scene = advance(scene0, n)
        truths = truth_params(scene, pv.id, PathKind.FORWARD, params)
        sym = pack_bits(random_payload(params, FrameKind.DDM, payload_rng),
                        params, FrameKind.DDM)
        clean = synthesize_rx(params, truths, sym, FrameKind.DDM, Side.PV, amp)
        rx = add_awgn(clean, noise, np.random.default_rng([cfg.seed, 6, n]))
        out = tracker.step(n, rx)
        dp, dv, r, v_r, theta, orient = _relative_truth(scene, pv.id, av.id)
        # The tracker keeps states on the observable c_y >= 0 sheet; mirror
        # the truth the same way so velocity/orientation errors are fair.
        mirror = -1.0 if dp[1] < 0 else 1.0
        row = {"frame": n, "target_id": av.id,
               "r_true": r, "v_true": v_r, "theta_true": theta,
               "orient_true": math.atan2(dv[0], mirror * dv[1]),
               "vx_true": float(dv[0]), "vy_true": float(mirror * dv[1]),
               "r_obs": None, "v_obs": None, "theta_obs": None,
               "r_fused": None, "v_fused": None, "theta_fused": None,
               "orient_est": None, "vx_est": None, "vy_est": None,
               "v_tan_est": None, "track_id": 1,
               "sigma_min_eig": float(np.linalg.eigvalsh(tracker.track.sigma).min()),
               "demod_bits": "", "symbol_ok": ""}
        mu = out.mu
        rr = math.hypot(mu[0], mu[1])
        row.update(r_fused=rr, v_fused=(mu[2] * mu[0] + mu[3] * mu[1]) / rr,
                   theta_fused=math.asin(mu[0] / rr), orient_est=out.orientation,
                   vx_est=float(mu[2]), vy_est=float(mu[3]),
                   v_tan_est=tangential_velocity(mu))
        if out.detected:
            row.update(r_obs=out.obs_corrected.r, v_obs=out.obs_corrected.v_r,
                       theta_obs=out.obs_corrected.theta,
                       demod_bits=out.demod.bits,
                       symbol_ok=int(out.demod.bits == unpack_bits(sym, params,
                                                                   FrameKind.DDM)))
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Achievable-rate sweep

def run_rate_sweep(cfg: RunConfig) -> list[dict]:
    from .rate import (build_ddm_codebook, build_qam_only_codebook,
                       build_tdm_codebook, mutual_information_mc)
    rc = cfg.rate
    rows = []
    for draw in range(rc.channel_draws):
        rng_ch = np.random.default_rng([cfg.seed, 9, draw])
        if rc.scheme == "ddm":
            cb = build_ddm_codebook(rc.n_f, rc.n_c, rc.n_tx, rc.n_q, rng=rng_ch)
        elif rc.scheme == "tdm":
            cb = build_tdm_codebook(rc.n_f, rc.n_q, rng=rng_ch)
        elif rc.scheme == "qam-only":
            cb = build_qam_only_codebook(rc.n_f, rc.n_c, rc.n_tx, rc.n_q,
                                         rng=rng_ch)
        else:
            raise HarnessError(f"unknown rate scheme {rc.scheme!r}")
        for si, snr in enumerate(rc.snr_db):
            sigma2 = 10.0 ** (-snr / 10.0)
            mi, se = mutual_information_mc(cb.with_sigma2(sigma2), rc.samples,
                                           np.random.default_rng([cfg.seed, 10,
                                                                  draw, si]))
            rows.append({"scheme": rc.scheme, "draw": draw, "snr_db": snr,
                         "mi_bits": mi, "mi_se": se,
                         "log2_m": math.log2(cb.m)})
    return rows


# ---------------------------------------------------------------------------
# Output

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def _row_dict(row) -> dict:
    if isinstance(row, dict):
        return row
    return {k: getattr(row, k) for k in row.__dataclass_fields__}


def emit(rows, fmt: str, path: str) -> None:
    """Write metric rows byte-stably (floats at 9 significant digits)."""
    dicts = [_row_dict(r) for r in rows]
    keys = list(dicts[0].keys()) if dicts else []
    if fmt == "csv":
        lines = ["# schema=1"]
        lines.append(",".join(keys))
        for d in dicts:
            lines.append(",".join(_fmt(d[k]) for k in keys))
        text = "\n".join(lines) + "\n"
        with open(path, "w") as fh:
            fh.write(text)
    elif fmt == "json":
        def clean(v):
            if isinstance(v, float):
                return float(f"{v:.9g}")
            return v
        payload = {"schema": 1,
                   "rows": [{k: clean(v) for k, v in d.items()} for d in dicts]}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        raise HarnessError(f"unknown output format {fmt!r}")
