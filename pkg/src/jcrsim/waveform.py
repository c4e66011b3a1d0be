"""DD-QAM payload handling.

Radar/waveform constants, delay-Doppler resolutions, QAM constellations,
slow-time DDM codes, and the bit-level frame budget with its packing rules.
All functions here are pure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

C_LIGHT = 2.99792458e8  # m/s


class FrameKind(enum.Enum):
    BEACON = "beacon"        # single transmit antenna, unambiguous Doppler
    DDM = "ddm"              # all antennas with slow-time DDM phase codes
    TDM_CHIRP = "tdm_chirp"  # per-chirp time-division variant (budget/rate only)


class Side(enum.Enum):
    AV = "av"  # active vehicle: monostatic echo, two-way delay/Doppler
    PV = "pv"  # passive vehicle: forward link, one-way delay/Doppler


class WaveformError(ValueError):
    pass


@dataclass(frozen=True)
class RadarParams:
    """Waveform, timing and array constants of the chirp JCR transceiver.

    Timings: ``t_c`` is the sampled window within one chirp, ``t_chirp`` the
    chirp duration, ``t_unit = t_chirp + t_gap`` the chirp repetition unit.
    Array: rectangular tx/rx panels on the x-z plane; azimuth spacing of the
    tx panel equals the full rx azimuth aperture (and likewise in elevation)
    so the combined virtual array is uniform.
    """

    f_c: float          # carrier, Hz
    bandwidth: float    # chirp sweep, Hz
    f_s: float          # ADC rate, Hz
    n_f: int            # fast-time samples per chirp (= round(t_c * f_s))
    n_c: int            # chirps per frame
    t_c: float          # sampled window per chirp, s
    t_chirp: float      # chirp duration, s
    t_unit: float       # chirp repetition unit, s
    t_gap: float        # inter-chirp guard, s
    n_tx_a: int
    n_tx_e: int
    n_rx_a: int
    n_rx_e: int
    d_tx_a: float       # m
    d_tx_e: float
    d_rx_a: float
    d_rx_e: float
    theta_max: float    # azimuth field of view half-angle, rad
    phi_max: float      # elevation field of view half-angle, rad
    n_q: int            # QAM order

    def __post_init__(self):
        if self.n_f != round(self.t_c * self.f_s):
            raise WaveformError("n_f must equal round(t_c * f_s)")
        if not math.isclose(self.t_unit, self.t_chirp + self.t_gap, rel_tol=1e-9):
            raise WaveformError("t_unit must equal t_chirp + t_gap")
        if self.n_q not in (4, 16, 64):
            raise WaveformError(f"unsupported QAM order {self.n_q}")
        if self.n_c % self.n_tx != 0:
            raise WaveformError("n_c must be divisible by n_tx")
        if not math.isclose(self.d_tx_a, self.n_rx_a * self.d_rx_a, rel_tol=1e-9):
            raise WaveformError("d_tx_a must equal n_rx_a * d_rx_a")
        if not math.isclose(self.d_tx_e, self.n_rx_e * self.d_rx_e, rel_tol=1e-9):
            raise WaveformError("d_tx_e must equal n_rx_e * d_rx_e")

    @property
    def n_tx(self) -> int:
        return self.n_tx_a * self.n_tx_e

    @property
    def n_rx(self) -> int:
        return self.n_rx_a * self.n_rx_e

    @property
    def alpha(self) -> float:
        """Chirp rate, Hz/s."""
        return self.bandwidth / self.t_chirp

    @property
    def lam(self) -> float:
        return C_LIGHT / self.f_c

    @property
    def t_s(self) -> float:
        return 1.0 / self.f_s

    @property
    def frame_period(self) -> float:
        return self.n_c * self.t_unit


def make_params(f_c, bandwidth, f_s, t_c, t_chirp, t_gap, n_c,
                n_tx_a, n_tx_e, n_rx_a, n_rx_e,
                theta_max, phi_max, n_q=4) -> RadarParams:
    """Build RadarParams, deriving n_f, t_unit and the array spacings.

    Receive spacings follow the field of view (lam / (2 sin(max angle)));
    transmit spacings span the full receive aperture per axis.
    """
    lam = C_LIGHT / f_c
    d_rx_a = lam / (2.0 * math.sin(theta_max))
    d_rx_e = lam / (2.0 * math.sin(phi_max))
    return RadarParams(
        f_c=f_c, bandwidth=bandwidth, f_s=f_s,
        n_f=round(t_c * f_s), n_c=n_c,
        t_c=t_c, t_chirp=t_chirp, t_unit=t_chirp + t_gap, t_gap=t_gap,
        n_tx_a=n_tx_a, n_tx_e=n_tx_e, n_rx_a=n_rx_a, n_rx_e=n_rx_e,
        d_tx_a=n_rx_a * d_rx_a, d_tx_e=n_rx_e * d_rx_e,
        d_rx_a=d_rx_a, d_rx_e=d_rx_e,
        theta_max=theta_max, phi_max=phi_max, n_q=n_q,
    )


def default_params(n_q: int = 4) -> RadarParams:
    """Nominal 80 GHz automotive parameter set (1024x128 frame, 4x16 MIMO)."""
    t_c = 51.2e-6
    return make_params(
        f_c=80e9, bandwidth=640e6, f_s=20e6,
        t_c=t_c, t_chirp=t_c * 64 / 60, t_gap=t_c * 4 / 60,
        n_c=128, n_tx_a=2, n_tx_e=2, n_rx_a=8, n_rx_e=2,
        theta_max=math.radians(60.0), phi_max=math.radians(15.0), n_q=n_q,
    )


def desk_params(n_q: int = 4, f_s: float = 5e6, n_c: int = 64,
                n_rx_a: int = 2, n_rx_e: int = 2,
                bandwidth: float = 640e6) -> RadarParams:
    """Reduced-size variant for fast experiments: same timings and carrier,
    lower ADC rate (smaller n_f), fewer chirps and receive antennas."""
    t_c = 51.2e-6
    return make_params(
        f_c=80e9, bandwidth=bandwidth, f_s=f_s,
        t_c=t_c, t_chirp=t_c * 64 / 60, t_gap=t_c * 4 / 60,
        n_c=n_c, n_tx_a=2, n_tx_e=2, n_rx_a=n_rx_a, n_rx_e=n_rx_e,
        theta_max=math.radians(60.0), phi_max=math.radians(15.0), n_q=n_q,
    )


def scale_bandwidth(params: RadarParams, factor: float) -> RadarParams:
    """Scale the sweep bandwidth keeping t_c and the f_s/bandwidth ratio fixed.

    Halving the bandwidth halves the ADC rate and therefore n_f, which
    removes 3 dB of coherent fast-time gain.
    """
    f_s = params.f_s * factor
    return replace(params, bandwidth=params.bandwidth * factor, f_s=f_s,
                   n_f=round(params.t_c * f_s))


def derived_resolutions(params: RadarParams, side: Side) -> tuple[float, float]:
    """(range, radial-velocity) resolution in m and m/s for one side.

    The forward link sees one-way delay/Doppler, so the passive side's cells
    are exactly twice the active side's.
    """
    r_res = C_LIGHT * params.t_chirp / (2.0 * params.bandwidth * params.t_c)
    v_res = C_LIGHT / (2.0 * params.n_c * params.t_unit * params.f_c)
    if side is Side.PV:
        return 2.0 * r_res, 2.0 * v_res
    return r_res, v_res


# ---------------------------------------------------------------------------
# QAM constellation

def _gray_to_index(g: int) -> int:
    """Decode a Gray codeword to its position in the level sequence."""
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


def qam_constellation(n_q: int) -> np.ndarray:
    """Square Gray-labelled QAM, unit average power.

    Index layout: the upper half of the label bits selects the I level, the
    lower half the Q level; per-axis labels are Gray coded so adjacent levels
    differ in one bit.
    """
    if n_q not in (4, 16, 64):
        raise WaveformError(f"unsupported QAM order {n_q}")
    bits_axis = int(math.log2(n_q)) // 2
    n_lvl = 1 << bits_axis
    levels = np.arange(n_lvl) * 2.0 - (n_lvl - 1)
    points = np.empty(n_q, dtype=complex)
    for label in range(n_q):
        gi = label >> bits_axis
        gq = label & (n_lvl - 1)
        points[label] = levels[_gray_to_index(gi)] + 1j * levels[_gray_to_index(gq)]
    scale = math.sqrt(np.mean(np.abs(points) ** 2))
    return points / scale


def nearest_constellation_index(z: complex, constellation: np.ndarray) -> int:
    """Index of the closest constellation point (ties: lowest index)."""
    return int(np.argmin(np.abs(constellation - z)))


# ---------------------------------------------------------------------------
# DDM slow-time code

def ddm_code(n_tx: int, n_c: int, n_tx_total: int) -> complex:
    """Unit-modulus slow-time phase code exp(j 2 pi n_c n_tx / N_tx).

    Antenna ``n_tx`` acquires a Doppler offset of n_tx * N_c / N_tx bins,
    which is what makes the transmitters separable after the slow-time DFT.
    """
    return np.exp(2j * np.pi * n_tx * n_c / n_tx_total)


# ---------------------------------------------------------------------------
# Payload symbol and bit packing

@dataclass(frozen=True)
class DdQamSymbol:
    """One frame's payload: delay bin, Doppler bin and a QAM point."""

    f_r_d: int
    f_v_d: int
    beta_d: complex

    @classmethod
    def empty(cls) -> "DdQamSymbol":
        return cls(0, 0, 1.0 + 0.0j)


def _field_widths(params: RadarParams, kind: FrameKind) -> tuple[int, int, int]:
    n_delay = int(math.floor(math.log2(params.n_f // 2)))
    n_qam = int(math.floor(math.log2(params.n_q)))
    if kind is FrameKind.BEACON:
        n_dopp = int(math.floor(math.log2(params.n_c)))
    elif kind is FrameKind.DDM:
        n_dopp = int(math.floor(math.log2(params.n_c // params.n_tx)))
    else:  # per-chirp TDM carries no Doppler field
        n_dopp = 0
    return n_delay, n_dopp, n_qam


def bits_per_frame(params: RadarParams, kind: FrameKind) -> int:
    """Payload bits carried by one frame (one chirp for the TDM variant)."""
    return sum(_field_widths(params, kind))


def pack_bits(bits: str, params: RadarParams, kind: FrameKind) -> DdQamSymbol:
    """Map a bit string to (delay bin, Doppler bin, QAM point).

    Field order is big-endian (delay, Doppler, QAM); the QAM field indexes
    the Gray-labelled constellation.
    """
    n_delay, n_dopp, n_qam = _field_widths(params, kind)
    if len(bits) != n_delay + n_dopp + n_qam or set(bits) - {"0", "1"}:
        raise WaveformError(
            f"expected {n_delay + n_dopp + n_qam} bits, got {len(bits)!r}")
    f_r_d = int(bits[:n_delay], 2) if n_delay else 0
    f_v_d = int(bits[n_delay:n_delay + n_dopp], 2) if n_dopp else 0
    qam_idx = int(bits[n_delay + n_dopp:], 2) if n_qam else 0
    beta_d = complex(qam_constellation(params.n_q)[qam_idx])
    return DdQamSymbol(f_r_d=f_r_d, f_v_d=f_v_d, beta_d=beta_d)


def unpack_bits(sym: DdQamSymbol, params: RadarParams, kind: FrameKind) -> str:
    """Inverse of pack_bits. Raises on out-of-range indices."""
    n_delay, n_dopp, n_qam = _field_widths(params, kind)
    if not 0 <= sym.f_r_d < (1 << n_delay) or sym.f_r_d >= params.n_f // 2:
        raise WaveformError(f"delay index {sym.f_r_d} out of range")
    dopp_max = params.n_c if kind is FrameKind.BEACON else params.n_c // params.n_tx
    if kind is FrameKind.TDM_CHIRP:
        dopp_max = 1
    if not 0 <= sym.f_v_d < min(1 << n_dopp if n_dopp else 1, dopp_max):
        raise WaveformError(f"Doppler index {sym.f_v_d} out of range")
    qam_idx = nearest_constellation_index(sym.beta_d, qam_constellation(params.n_q))
    out = ""
    if n_delay:
        out += format(sym.f_r_d, f"0{n_delay}b")
    if n_dopp:
        out += format(sym.f_v_d, f"0{n_dopp}b")
    if n_qam:
        out += format(qam_idx, f"0{n_qam}b")
    return out


def random_payload(params: RadarParams, kind: FrameKind, rng: np.random.Generator) -> str:
    n_bits = bits_per_frame(params, kind)
    return "".join("1" if b else "0" for b in rng.integers(0, 2, size=n_bits))
