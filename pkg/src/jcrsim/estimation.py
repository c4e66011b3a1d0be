"""Beacon-frame-aided 4D parameter estimation.

Scans the detected range-Doppler grid of a DDM frame; a cell is a confirmed
detection when all (configurable) DDM replicas at Doppler spacing n_c/n_tx
are detected and, when a reference mask is supplied, its 3x3 neighborhood in
that mask is non-empty. Confirmed cells are associated into per-target lists
(one per cell of the spectral-leakage cluster) and averaged, which is what
buys quasi-off-grid accuracy from on-grid detections. Angles come from a
redundant-dictionary DFT over the virtual (echo) or physical (forward) array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frontend import Rdm, SpectrumTensor
from .waveform import RadarParams, Side, derived_resolutions


class EstimationError(ValueError):
    pass


@dataclass
class EstimatorConfig:
    varpi_r: float = 1.0            # association threshold, range bins
    varpi_v: float = 1.0            # association threshold, Doppler bins
    angle_grid_step: float = math.radians(1.0)
    replicas_required: int | None = None  # default: all n_tx
    angle_interp: bool = True       # parabolic sub-grid peak interpolation


@dataclass
class TargetRecord:
    """Per-target leakage lists and their final averages.

    All six lists always hold the same number of entries; ``grids`` keeps the
    contributing (i_f, i_c) cells for bookkeeping.
    """

    r_list: list[float] = field(default_factory=list)
    v_list: list[float] = field(default_factory=list)
    theta_tx_list: list[float] = field(default_factory=list)
    phi_tx_list: list[float] = field(default_factory=list)
    theta_rx_list: list[float] = field(default_factory=list)
    phi_rx_list: list[float] = field(default_factory=list)
    grids: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n_hits(self) -> int:
        return len(self.r_list)

    @property
    def r(self) -> float:
        return float(np.mean(self.r_list))

    @property
    def v(self) -> float:
        return float(np.mean(self.v_list))

    @property
    def theta_tx(self) -> float:
        return float(np.mean(self.theta_tx_list))

    @property
    def phi_tx(self) -> float:
        return float(np.mean(self.phi_tx_list))

    @property
    def theta_rx(self) -> float:
        return float(np.mean(self.theta_rx_list))

    @property
    def phi_rx(self) -> float:
        return float(np.mean(self.phi_rx_list))

    @property
    def averaged(self) -> tuple[float, float, float, float, float, float]:
        return (self.r, self.v, self.theta_tx, self.phi_tx,
                self.theta_rx, self.phi_rx)

    def angles_at(self, grid: tuple[int, int]) -> tuple[float, float, float, float]:
        """Angle estimates of one contributing cell (tx az/el, rx az/el).

        A widely spaced transmit panel has exact grating aliases; individual
        cells pick either alias, so the list averages can land between them.
        Anything that builds an array response must use one cell's estimate.
        """
        i = self.grids.index(grid)
        return (self.theta_tx_list[i], self.phi_tx_list[i],
                self.theta_rx_list[i], self.phi_rx_list[i])


# ---------------------------------------------------------------------------
# Redundant-dictionary angle search

def _sin_grid(max_angle: float, step: float) -> np.ndarray:
    """Uniform grid in the sin domain, symmetric and containing 0."""
    step_sin = math.sin(step)
    half = int(math.floor(math.sin(max_angle) / step_sin))
    return (np.arange(2 * half + 1) - half) * step_sin


_DICTIONARY_CACHE: dict[tuple, tuple] = {}


def _virtual_dictionary(params: RadarParams, cfg: EstimatorConfig):
    """Steering tables for the (n_tx_e n_rx_e) x (n_tx_a n_rx_a) virtual array.

    The virtual array is uniform with the rx spacings, so the response
    factorizes into an elevation vector (rows) and an azimuth vector (cols)
    whose spatial frequency cos(phi) sin(theta) couples the two axes.
    """
    key = ("virtual", params.lam, params.d_rx_a, params.d_rx_e,
           params.n_tx_a * params.n_rx_a, params.n_tx_e * params.n_rx_e,
           params.theta_max, params.phi_max, cfg.angle_grid_step)
    if key in _DICTIONARY_CACHE:
        return _DICTIONARY_CACHE[key]
    s_az = _sin_grid(params.theta_max, cfg.angle_grid_step)
    s_el = _sin_grid(params.phi_max, cfg.angle_grid_step)
    rows = np.arange(params.n_tx_e * params.n_rx_e)
    cols = np.arange(params.n_tx_a * params.n_rx_a)
    k = 2.0 * np.pi / params.lam
    # conj steering, elevation: (n_el, rows)
    ve = np.exp(-1j * k * params.d_rx_e * np.outer(s_el, rows))
    # conj steering, azimuth per elevation: (n_el, cols, n_az)
    cos_el = np.sqrt(1.0 - s_el ** 2)
    u = cos_el[:, None] * s_az[None, :]                      # (n_el, n_az)
    va = np.exp(-1j * k * params.d_rx_a
                * cols[None, :, None] * u[:, None, :])       # (n_el, cols, n_az)
    entry = (s_az, s_el, ve, va)
    _DICTIONARY_CACHE[key] = entry
    return entry


def _physical_dictionary(params: RadarParams, cfg: EstimatorConfig, array: str):
    """Joint (azimuth, elevation) conj-steering table for one physical array."""
    if array == "rx":
        n_a, n_e, d_a, d_e = params.n_rx_a, params.n_rx_e, params.d_rx_a, params.d_rx_e
    elif array == "tx":
        n_a, n_e, d_a, d_e = params.n_tx_a, params.n_tx_e, params.d_tx_a, params.d_tx_e
    else:
        raise EstimationError(f"unknown array {array!r}")
    key = ("physical", array, params.lam, n_a, n_e, d_a, d_e,
           params.theta_max, params.phi_max, cfg.angle_grid_step)
    if key in _DICTIONARY_CACHE:
        return _DICTIONARY_CACHE[key]
    s_az = _sin_grid(params.theta_max, cfg.angle_grid_step)
    s_el = _sin_grid(params.phi_max, cfg.angle_grid_step)
    idx = np.arange(n_a * n_e)
    ax = (idx % n_a) * d_a
    el = (idx // n_a) * d_e
    k = 2.0 * np.pi / params.lam
    cos_el = np.sqrt(1.0 - s_el ** 2)
    u = cos_el[:, None] * s_az[None, :]
    # conj steering: (n_el, n_az, n_elements)
    phase = (ax[None, None, :] * u[:, :, None]
             + el[None, None, :] * s_el[:, None, None])
    table = np.exp(-1j * k * phase)
    entry = (s_az, s_el, table)
    _DICTIONARY_CACHE[key] = entry
    return entry


def angle_dft_estimate(p: np.ndarray, params: RadarParams, cfg: EstimatorConfig,
                       virtual: bool, array: str = "rx") -> tuple[float, float]:
    """(azimuth, elevation) of the dictionary atom best matching ``p``.

    ``virtual=True``: ``p`` is the rearranged virtual-array response (echo
    side, AoA = AoD). ``virtual=False``: rows of ``p`` index the chosen
    physical array and its columns act as snapshots whose correlation powers
    are summed (forward side, AoA != AoD).
    """
    if p.size == 0:
        raise EstimationError("empty antenna response")
    if virtual:
        s_az, s_el, ve, va = _virtual_dictionary(params, cfg)
        t = ve @ p                                   # (n_el, cols)
        corr = np.abs(np.einsum("ec,ecu->eu", t, va))
    else:
        s_az, s_el, table = _physical_dictionary(params, cfg, array)
        proj = np.tensordot(table, p, axes=([2], [0]))  # (n_el, n_az, n_snap)
        corr = np.sum(np.abs(proj) ** 2, axis=2)
    e_idx, a_idx = np.unravel_index(int(np.argmax(corr)), corr.shape)
    s_el_hat = _parabolic_peak(corr[:, a_idx], e_idx, s_el, cfg.angle_interp)
    s_az_hat = _parabolic_peak(corr[e_idx, :], a_idx, s_az, cfg.angle_interp)
    phi = math.asin(min(1.0, max(-1.0, s_el_hat)))
    theta = math.asin(min(1.0, max(-1.0, s_az_hat / math.cos(phi))))
    return theta, phi


def _parabolic_peak(row: np.ndarray, idx: int, grid: np.ndarray,
                    enabled: bool) -> float:
    """Sub-grid peak position along one axis of the correlation surface.

    The 1-degree dictionary quantizes the bearing into a staircase whose
    plateau bias a tracking filter misreads as cross-range motion; a
    three-point parabola through the peak removes it.
    """
    if not enabled or not 0 < idx < len(grid) - 1 or len(grid) < 3:
        return float(grid[idx])
    c_m, c_0, c_p = row[idx - 1], row[idx], row[idx + 1]
    denom = c_m - 2.0 * c_0 + c_p
    if denom >= 0.0:
        return float(grid[idx])
    delta = 0.5 * (c_m - c_p) / denom
    delta = max(-0.5, min(0.5, delta))
    return float(grid[idx] + delta * (grid[1] - grid[0]))


# ---------------------------------------------------------------------------
# Sub-bin peak refinement
#
# The arithmetic list average is biased by up to half a bin when the
# detector catches a leakage cluster's tail cells asymmetrically, which is
# exactly the margin an integer-rounding demodulator has. The two strongest
# cells of one axis determine the tone offset through the window transform:
# invert |W(delta - 1)| / |W(delta)| numerically for the actual window.

_RATIO_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _window_ratio_table(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    key = (len(w), round(float(w.sum()), 12), round(float(w[1]), 12))
    if key in _RATIO_CACHE:
        return _RATIO_CACHE[key]
    n = len(w)
    deltas = np.linspace(0.0, 0.5, 501)
    idx = np.arange(n)
    resp = np.abs([np.sum(w * np.exp(2j * np.pi * idx * d / n))
                   for d in np.concatenate([deltas, deltas - 1.0])])
    main, neigh = resp[:len(deltas)], resp[len(deltas):]
    ratios = neigh / np.maximum(main, 1e-300)
    _RATIO_CACHE[key] = (ratios, deltas)
    return _RATIO_CACHE[key]


def _axis_offset(mag_lo: float, mag_peak: float, mag_hi: float,
                 w: np.ndarray) -> float:
    """Signed sub-bin offset of a tone from its peak cell, in (-0.5, 0.5)."""
    ratios, deltas = _window_ratio_table(w)
    if mag_hi >= mag_lo:
        alpha, sign = mag_hi / max(mag_peak, 1e-300), 1.0
    else:
        alpha, sign = mag_lo / max(mag_peak, 1e-300), -1.0
    alpha = min(alpha, ratios[-1])
    if alpha <= ratios[0]:
        return 0.0
    return sign * float(np.interp(alpha, ratios, deltas))


def record_peak_grid(det: Rdm, rec: TargetRecord) -> tuple[int, int]:
    """Strongest contributing cell of a record on the range-Doppler map."""
    return max(rec.grids, key=lambda g: det.mag[g[0], g[1]])


def refine_peak(det: Rdm, grid: tuple[int, int], w_f: np.ndarray,
                w_c: np.ndarray) -> tuple[float, float]:
    """Fractional (range bin, Doppler bin) of the tone at a detected cell."""
    i_f, i_c = grid
    n_f, n_c = det.mag.shape
    d_f = _axis_offset(det.mag[(i_f - 1) % n_f, i_c], det.mag[i_f, i_c],
                       det.mag[(i_f + 1) % n_f, i_c], w_f)
    d_c = _axis_offset(det.mag[i_f, (i_c - 1) % n_c], det.mag[i_f, i_c],
                       det.mag[i_f, (i_c + 1) % n_c], w_c)
    return i_f + d_f, i_c + d_c


# ---------------------------------------------------------------------------
# Antenna response extraction

def extract_antenna_response(st: SpectrumTensor, grid: tuple[int, int],
                             params: RadarParams) -> np.ndarray:
    """(n_rx, n_tx) complex amplitudes of the DDM replicas at one grid cell.

    Column n_tx is pulled from Doppler bin (i_c + n_tx * n_c/n_tx) mod n_c;
    the common leakage factor of the cell cancels in the angle search.
    """
    i_f, i_c = grid
    n_f, n_c, _ = st.data.shape
    if not (0 <= i_f < n_f and 0 <= i_c < n_c):
        raise EstimationError(f"grid {grid} out of range")
    step = n_c // params.n_tx
    cols = (i_c + step * np.arange(params.n_tx)) % n_c
    return st.data[i_f, cols, :].T.copy()


def rearrange_virtual_array(p_tilde: np.ndarray, params: RadarParams) -> np.ndarray:
    """Reorder (n_rx, n_tx) into the uniform virtual array.

    Row index n_tx_e * n_rx_e + n_rx_e', column n_tx_a * n_rx_a + n_rx_a':
    a bijection because the tx spacings equal the full rx apertures.
    """
    if p_tilde.shape != (params.n_rx, params.n_tx):
        raise EstimationError("antenna response has wrong shape")
    out = np.empty((params.n_tx_e * params.n_rx_e,
                    params.n_tx_a * params.n_rx_a), dtype=complex)
    for n_tx in range(params.n_tx):
        for n_rx in range(params.n_rx):
            row = (n_tx // params.n_tx_a) * params.n_rx_e + n_rx // params.n_rx_a
            col = (n_tx % params.n_tx_a) * params.n_rx_a + n_rx % params.n_rx_a
            out[row, col] = p_tilde[n_rx, n_tx]
    return out


# ---------------------------------------------------------------------------
# Algorithm core

def _reference_gate(mask: np.ndarray, i_f: int, i_c: int) -> bool:
    """Any detection in the wrapped 3x3 neighborhood of the reference mask."""
    n_f, n_c = mask.shape
    rows = (np.arange(i_f - 1, i_f + 2)) % n_f
    cols = (np.arange(i_c - 1, i_c + 2)) % n_c
    return bool(mask[np.ix_(rows, cols)].any())


def estimate_4d(beacon: tuple[SpectrumTensor, Rdm] | None,
                ddm: tuple[SpectrumTensor, Rdm],
                params: RadarParams, cfg: EstimatorConfig) -> list[TargetRecord]:
    """Run the grid scan and return finalized target records.

    ``beacon`` supplies the reference mask resolving the DDM Doppler
    ambiguity; any frame whose detections sit at the true Doppler works
    (after initialization the previous payload-free frame plays this role).
    ``beacon=None`` skips the gate, leaving all n_tx replica hypotheses in
    the output for the caller to disambiguate.
    """
    st, det = ddm
    if det.mask is None:
        raise EstimationError("DDM map has no CFAR mask")
    ref_mask = None
    if beacon is not None:
        if beacon[1].mask is None:
            raise EstimationError("reference map has no CFAR mask")
        ref_mask = beacon[1].mask
    mask = det.mask
    n_f, n_c = mask.shape
    side = st.side
    r_res, v_res = derived_resolutions(params, side)
    step = n_c // params.n_tx
    need = cfg.replicas_required if cfg.replicas_required is not None else params.n_tx

    records: list[TargetRecord] = []
    means_r: list[float] = []   # running Avg(r_list)/r_res per record
    means_v: list[float] = []

    offsets = step * np.arange(params.n_tx)
    for i_f in range(n_f):
        row = mask[i_f]
        if not row.any():
            continue
        for i_c in range(n_c):
            if not row[i_c]:
                continue
            if int(row[(i_c + offsets) % n_c].sum()) < need:
                continue
            if ref_mask is not None and not _reference_gate(ref_mask, i_f, i_c):
                continue

            r_val = r_res * i_f
            v_val = v_res * (i_c - n_c / 2)
            target = None
            if records:
                costs = [abs(means_r[l] - i_f) + abs(means_v[l] - (i_c - n_c / 2))
                         for l in range(len(records))]
                best = int(np.argmin(costs))
                if (abs(means_r[best] - i_f) <= cfg.varpi_r
                        and abs(means_v[best] - (i_c - n_c / 2)) <= cfg.varpi_v):
                    target = best
            if target is None:
                records.append(TargetRecord())
                means_r.append(0.0)
                means_v.append(0.0)
                target = len(records) - 1

            rec = records[target]
            rec.r_list.append(r_val)
            rec.v_list.append(v_val)
            rec.grids.append((i_f, i_c))
            means_r[target] = float(np.mean(rec.r_list)) / r_res
            means_v[target] = float(np.mean(rec.v_list)) / v_res

            p_tilde = extract_antenna_response(st, (i_f, i_c), params)
            if side is Side.AV:
                p_bar = rearrange_virtual_array(p_tilde, params)
                theta, phi = angle_dft_estimate(p_bar, params, cfg, virtual=True)
                rec.theta_tx_list.append(theta)
                rec.phi_tx_list.append(phi)
                rec.theta_rx_list.append(theta)
                rec.phi_rx_list.append(phi)
            else:
                th_rx, ph_rx = angle_dft_estimate(p_tilde, params, cfg,
                                                  virtual=False, array="rx")
                th_tx, ph_tx = angle_dft_estimate(p_tilde.T.copy(), params, cfg,
                                                  virtual=False, array="tx")
                rec.theta_rx_list.append(th_rx)
                rec.phi_rx_list.append(ph_rx)
                rec.theta_tx_list.append(th_tx)
                rec.phi_tx_list.append(ph_tx)
    return records
