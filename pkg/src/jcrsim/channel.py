"""Discrete received-signal synthesis.

Builds the post-mixing sample cube (fast-time x slow-time x rx antenna)
directly in normalized-frequency form: each path contributes a 2D complex
tone at (delay bins + payload delay bins, Doppler bins + payload Doppler
bins) times the tx/rx array phases, with DDM slow-time codes appearing as
per-antenna Doppler offsets. The continuous mixing chain is never simulated.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .scenario import PathTruth
from .waveform import C_LIGHT, DdQamSymbol, FrameKind, RadarParams, Side


class LpfFilteredError(ValueError):
    """Delay frequency beyond the anti-aliasing budget: the analog low-pass
    filter would remove this component before sampling."""


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizedFreqs:
    f_r: float  # delay bins in [0, n_f/2)
    f_v: float  # Doppler bins (wraps mod n_c)


@dataclass(frozen=True)
class RxTensor:
    data: np.ndarray  # complex, (n_f, n_c, n_rx)
    side: Side
    kind: FrameKind

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ChannelError("rx tensor must be 3-dimensional")


def normalized_freqs(truth: PathTruth, params: RadarParams, side: Side) -> NormalizedFreqs:
    """Map a path's (range, radial velocity) to DFT bins.

    The echo side carries the two-way factor 2; the forward side does not.
    Delay bins at or beyond n_f/2 are rejected: they exceed the sensing half
    of the delay budget and would be cut by the low-pass filter.
    """
    factor = 2.0 if side is Side.AV else 1.0
    f_r = factor * params.n_f * params.t_s * params.alpha * truth.r / C_LIGHT
    f_v = factor * params.n_c * params.t_unit * params.f_c * truth.v_r / C_LIGHT
    if not 0.0 <= f_r < params.n_f / 2:
        raise LpfFilteredError(
            f"delay frequency {f_r:.2f} bins outside [0, {params.n_f // 2})")
    return NormalizedFreqs(f_r=f_r, f_v=f_v)


def tx_positions(params: RadarParams) -> np.ndarray:
    """(n_tx, 3) element coordinates on the x-z plane, meters."""
    idx = np.arange(params.n_tx)
    out = np.zeros((params.n_tx, 3))
    out[:, 0] = (idx % params.n_tx_a) * params.d_tx_a
    out[:, 2] = (idx // params.n_tx_a) * params.d_tx_e
    return out


def rx_positions(params: RadarParams) -> np.ndarray:
    idx = np.arange(params.n_rx)
    out = np.zeros((params.n_rx, 3))
    out[:, 0] = (idx % params.n_rx_a) * params.d_rx_a
    out[:, 2] = (idx // params.n_rx_a) * params.d_rx_e
    return out


def steering_vector(theta: float, phi: float, positions: np.ndarray,
                    params: RadarParams) -> np.ndarray:
    """Array response exp(j 2 pi f_c/c * d(theta, phi) . p) per element."""
    d = np.array([np.cos(phi) * np.sin(theta),
                  np.cos(phi) * np.cos(theta),
                  np.sin(phi)])
    return np.exp(2j * np.pi * params.f_c / C_LIGHT * (positions @ d))


def synthesize_rx(params: RadarParams, truths: list[PathTruth], sym: DdQamSymbol,
                  kind: FrameKind, side: Side, tx_amp: float,
                  *, delay_stride: int = 1) -> RxTensor:
    """Noise-free received cube for one frame.

    Beacon frames activate only transmit antenna 0; DDM frames sum all
    antennas with the slow-time code folded into per-antenna Doppler tones.
    The payload enters purely as bin offsets plus the QAM factor, so
    synthesizing payload (f_r_d, f_v_d) over truths equals synthesizing the
    payload-free tensor with every path shifted by those bins.
    """
    if kind is FrameKind.TDM_CHIRP:
        raise ChannelError("TDM tensors are not synthesized; TDM enters the "
                           "bit budget and rate codebooks only")
    n_f, n_c, n_rx = params.n_f, params.n_c, params.n_rx
    p_tx = tx_positions(params)
    p_rx = rx_positions(params)
    fast = np.arange(n_f)
    slow = np.arange(n_c)
    data = np.zeros((n_f, n_c, n_rx), dtype=complex)

    pay_r = delay_stride * sym.f_r_d
    for truth in truths:
        nf = normalized_freqs(truth, params, side)
        total_r = nf.f_r + pay_r
        if total_r >= n_f:
            raise LpfFilteredError(
                f"path + payload delay {total_r:.2f} bins reaches n_f={n_f}")
        total_v = nf.f_v + sym.f_v_d
        a_tx = steering_vector(truth.theta_tx, truth.phi_tx, p_tx, params)
        a_rx = steering_vector(truth.theta_rx, truth.phi_rx, p_rx, params)
        u = np.exp(2j * np.pi * fast * total_r / n_f)
        w = np.exp(2j * np.pi * slow * total_v / n_c)
        if kind is FrameKind.BEACON:
            tx_sum = a_tx[0] * np.ones(n_c, dtype=complex)
        else:
            # sum_t a_tx[t] * exp(j 2 pi slow * t / n_tx)
            codes = np.exp(2j * np.pi * np.outer(slow, np.arange(params.n_tx))
                           / params.n_tx)
            tx_sum = codes @ a_tx
        amp = tx_amp * truth.beta_h * sym.beta_d
        data += amp * u[:, None, None] * (w * tx_sum)[None, :, None] * a_rx[None, None, :]
    return RxTensor(data=data, side=side, kind=kind)


def add_awgn(t: RxTensor, noise_power: float, rng: np.random.Generator) -> RxTensor:
    """Add i.i.d. circular complex Gaussian noise of the given per-sample power."""
    if noise_power < 0:
        raise ChannelError("noise power must be >= 0")
    if noise_power == 0:
        return RxTensor(data=t.data.copy(), side=t.side, kind=t.kind)
    scale = np.sqrt(noise_power / 2.0)
    noise = scale * (rng.standard_normal(t.data.shape)
                     + 1j * rng.standard_normal(t.data.shape))
    return RxTensor(data=t.data + noise, side=t.side, kind=t.kind)


def snr_to_noise_power(snr_db: float, signal_amp: float) -> float:
    """Per-sample noise power for a target pre-DFT SNR at one rx antenna."""
    return abs(signal_amp) ** 2 / 10.0 ** (snr_db / 10.0)


# ---------------------------------------------------------------------------
# Binary tensor dump (rdm-dump CLI mode)

_SIDE_BIT = {Side.AV: 0, Side.PV: 1}
_KIND_BITS = {FrameKind.BEACON: 0, FrameKind.DDM: 1, FrameKind.TDM_CHIRP: 2}


def write_tensor(t: RxTensor, path: str) -> None:
    """Little-endian header (n_f, n_c, n_rx, flags as u32) then interleaved
    float64 re/im with fast-time varying fastest."""
    n_f, n_c, n_rx = t.data.shape
    flags = _SIDE_BIT[t.side] | (_KIND_BITS[t.kind] << 1)
    ordered = np.transpose(t.data, (2, 1, 0)).ravel()  # fast-time fastest
    inter = np.empty(2 * ordered.size)
    inter[0::2] = ordered.real
    inter[1::2] = ordered.imag
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4I", n_f, n_c, n_rx, flags))
        fh.write(inter.astype("<f8").tobytes())


def read_tensor(path: str) -> RxTensor:
    with open(path, "rb") as fh:
        n_f, n_c, n_rx, flags = struct.unpack("<4I", fh.read(16))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != 2 * n_f * n_c * n_rx:
        raise ChannelError("tensor file size does not match header")
    cube = (raw[0::2] + 1j * raw[1::2]).reshape(n_rx, n_c, n_f)
    side = Side.PV if flags & 1 else Side.AV
    kind = {v: k for k, v in _KIND_BITS.items()}[(flags >> 1) & 0b11]
    return RxTensor(data=np.transpose(cube, (2, 1, 0)).copy(), side=side, kind=kind)
