"""Scene state and ground-truth path parameters.

Vehicles move with constant velocity. At any frame index the scene can be
converted into per-path truth (range, range-rate, angles, complex gain) for
the monostatic echo channel of the active vehicle or the forward channel
towards a passive receiver.

Conventions: arrays lie in the x-z plane with boresight +y, so azimuth is
measured as arcsin(x / hypot(x, y)) and a planar array cannot tell front
from back -- field-of-view culling therefore uses the same convention.
Positive radial velocity means increasing range.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .waveform import RadarParams


class Role(enum.Enum):
    AV = "av"
    PV = "pv"
    OTHER = "other"


class PathKind(enum.Enum):
    ECHO = "echo"
    FORWARD = "forward"


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleState:
    id: int
    position: tuple[float, float, float]   # m, at frame index 0
    velocity: tuple[float, float, float]   # m/s
    role: Role


@dataclass(frozen=True)
class PathTruth:
    """Ground truth for one propagation path.

    ``r`` is the one-way target range for echo paths and the total one-way
    path length for forward paths (transmitter-scatterer-receiver for
    bounces). ``target_id`` names the vehicle the path reflects off (the
    transmitter itself for the direct forward path).
    """

    kind: PathKind
    r: float
    v_r: float
    theta_tx: float
    phi_tx: float
    theta_rx: float
    phi_rx: float
    beta_h: complex
    target_id: int


@dataclass(frozen=True)
class Scenario:
    vehicles: tuple[VehicleState, ...]
    frame_period: float     # s
    rng_seed: int
    frame_index: int = 0

    def __post_init__(self):
        if self.frame_period <= 0:
            raise GeometryError("frame_period must be positive")
        n_av = sum(1 for v in self.vehicles if v.role is Role.AV)
        if n_av != 1:
            raise GeometryError(f"scenario needs exactly one AV, got {n_av}")
        for v in self.vehicles:
            if not all(math.isfinite(x) for x in (*v.position, *v.velocity)):
                raise GeometryError(f"vehicle {v.id} has non-finite state")

    def vehicle(self, vehicle_id: int) -> VehicleState:
        for v in self.vehicles:
            if v.id == vehicle_id:
                return v
        raise GeometryError(f"no vehicle with id {vehicle_id}")

    def the_av(self) -> VehicleState:
        return next(v for v in self.vehicles if v.role is Role.AV)

    def position_of(self, v: VehicleState) -> np.ndarray:
        # Positions derive from the frame-0 state so that advancing k frames
        # twice is bit-identical to advancing 2k frames once.
        t = self.frame_index * self.frame_period
        return np.asarray(v.position, dtype=float) + t * np.asarray(v.velocity, dtype=float)


def advance(scene: Scenario, n_frames: int) -> Scenario:
    """Advance the scene by an integer number of frames."""
    if n_frames < 0:
        raise GeometryError("n_frames must be >= 0")
    return replace(scene, frame_index=scene.frame_index + int(n_frames))


def _angles(delta: np.ndarray) -> tuple[float, float]:
    """(azimuth, elevation) of a displacement in the x-z array convention."""
    r = float(np.linalg.norm(delta))
    if r == 0.0:
        raise GeometryError("coincident positions: degenerate geometry")
    ground = math.hypot(delta[0], delta[1])
    theta = math.asin(delta[0] / ground) if ground > 0 else 0.0
    phi = math.asin(delta[2] / r)
    return theta, phi


def _range_rate(delta_p: np.ndarray, delta_v: np.ndarray) -> float:
    r = float(np.linalg.norm(delta_p))
    if r == 0.0:
        raise GeometryError("coincident positions: degenerate geometry")
    return float(np.dot(delta_p, delta_v) / r)


def _in_fov(theta: float, phi: float, params: RadarParams) -> bool:
    return abs(theta) <= params.theta_max and abs(phi) <= params.phi_max


def _atmos_amp(total_path_m: float, db_per_km: float) -> float:
    return 10.0 ** (-db_per_km * (total_path_m / 1000.0) / 20.0)


def path_gain(kind: PathKind, r1: float, r2: float, params: RadarParams,
              rng: np.random.Generator, *, g_tx: float = 1.0, g_rx: float = 1.0,
              s_eff: float = 4.0, atmos_db_per_km: float = 2.0) -> complex:
    """Complex channel gain with uniform random phase.

    Echo paths follow the two-way radar equation with effective reflection
    area ``s_eff``; forward paths the one-way free-space law (``r2`` ignored
    for the direct case where r2 <= 0 is rejected anyway only for echo).
    Atmospheric attenuation applies over the full path length.
    """
    lam = params.lam
    if kind is PathKind.ECHO:
        if r1 <= 0 or r2 <= 0:
            raise GeometryError("ranges must be positive")
        amp = math.sqrt(g_tx * g_rx * s_eff * lam ** 2) \
            / math.sqrt((4 * math.pi) ** 3 * r1 ** 2 * r2 ** 2)
        amp *= _atmos_amp(r1 + r2, atmos_db_per_km)
    else:
        if r1 <= 0:
            raise GeometryError("range must be positive")
        amp = math.sqrt(g_tx * g_rx) * lam / (4 * math.pi * r1)
        amp *= _atmos_amp(r1, atmos_db_per_km)
    xi = rng.uniform(0.0, 2.0 * math.pi)
    return amp * complex(math.cos(xi), math.sin(xi))


def _bounce_gain(r1: float, r2: float, params: RadarParams,
                 rng: np.random.Generator) -> complex:
    # Forward path reflected off a scatterer: reuse the two-way law with the
    # transmitter-scatterer and scatterer-receiver legs.
    return path_gain(PathKind.ECHO, r1, r2, params, rng)


def _path_rng(scene: Scenario, kind: PathKind, observer_id: int, target_id: int
              ) -> np.random.Generator:
    # Phase is a property of the path, not of the frame: the same seed and
    # path identity must give the same draw at every frame index.
    code = 0 if kind is PathKind.ECHO else 1
    return np.random.default_rng([scene.rng_seed & 0x7FFFFFFF, code,
                                  observer_id, target_id])


def truth_params(scene: Scenario, observer_id: int, kind: PathKind,
                 params: RadarParams) -> list[PathTruth]:
    """Ground-truth path list seen by one observer at the current frame.

    Echo: the observer must be the AV; one path per other vehicle inside the
    field of view. Forward: the observer receives the AV's direct path plus
    one single-bounce path per remaining vehicle; paths whose departure or
    arrival direction falls outside the field of view are dropped.
    """
    obs = scene.vehicle(observer_id)
    av = scene.the_av()
    paths: list[PathTruth] = []

    if kind is PathKind.ECHO:
        if obs.role is not Role.AV:
            raise GeometryError("echo truth requires the AV as observer")
        p_av = scene.position_of(av)
        v_av = np.asarray(av.velocity, dtype=float)
        for tgt in scene.vehicles:
            if tgt.id == av.id:
                continue
            dp = scene.position_of(tgt) - p_av
            dv = np.asarray(tgt.velocity, dtype=float) - v_av
            theta, phi = _angles(dp)
            if not _in_fov(theta, phi, params):
                continue
            r = float(np.linalg.norm(dp))
            gain = path_gain(PathKind.ECHO, r, r, params,
                             _path_rng(scene, kind, observer_id, tgt.id))
            paths.append(PathTruth(kind, r, _range_rate(dp, dv),
                                   theta, phi, theta, phi, gain, tgt.id))
        return paths

    if obs.role is Role.AV:
        raise GeometryError("forward truth requires a non-AV observer")
    p_obs = scene.position_of(obs)
    v_obs = np.asarray(obs.velocity, dtype=float)
    p_av = scene.position_of(av)
    v_av = np.asarray(av.velocity, dtype=float)

    # Direct path AV -> observer.
    dp = p_av - p_obs
    dv = v_av - v_obs
    theta_rx, phi_rx = _angles(dp)
    theta_tx, phi_tx = _angles(-dp)
    if _in_fov(theta_rx, phi_rx, params) and _in_fov(theta_tx, phi_tx, params):
        r = float(np.linalg.norm(dp))
        gain = path_gain(PathKind.FORWARD, r, r, params,
                         _path_rng(scene, kind, observer_id, av.id))
        paths.append(PathTruth(kind, r, _range_rate(dp, dv),
                               theta_tx, phi_tx, theta_rx, phi_rx, gain, av.id))

    # Single-bounce paths AV -> scatterer -> observer.
    for sc in scene.vehicles:
        if sc.id in (av.id, obs.id):
            continue
        p_sc = scene.position_of(sc)
        v_sc = np.asarray(sc.velocity, dtype=float)
        d_as = p_sc - p_av
        d_so = p_sc - p_obs
        theta_tx, phi_tx = _angles(d_as)
        theta_rx, phi_rx = _angles(d_so)
        if not (_in_fov(theta_tx, phi_tx, params) and _in_fov(theta_rx, phi_rx, params)):
            continue
        r_as = float(np.linalg.norm(d_as))
        r_so = float(np.linalg.norm(d_so))
        v_r = _range_rate(d_as, v_sc - v_av) + _range_rate(d_so, v_sc - v_obs)
        gain = _bounce_gain(r_as, r_so, params,
                            _path_rng(scene, kind, observer_id, sc.id))
        paths.append(PathTruth(kind, r_as + r_so, v_r,
                               theta_tx, phi_tx, theta_rx, phi_rx, gain, sc.id))
    return paths
