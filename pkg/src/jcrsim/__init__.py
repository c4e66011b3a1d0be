"""Chirp delay-Doppler QAM joint communication and radar simulator."""

from .waveform import (DdQamSymbol, FrameKind, RadarParams, Side,
                       bits_per_frame, ddm_code, default_params,
                       derived_resolutions, desk_params, make_params,
                       pack_bits, qam_constellation, unpack_bits)
from .scenario import (PathKind, PathTruth, Role, Scenario, VehicleState,
                       advance, path_gain, truth_params)
from .channel import (LpfFilteredError, NormalizedFreqs, RxTensor, add_awgn,
                      normalized_freqs, read_tensor, snr_to_noise_power,
                      synthesize_rx, write_tensor)
from .frontend import (CfarConfig, Rdm, SpectrumTensor, cfar_detect,
                       detect_frame, rdm, spectrum, window)
from .estimation import (EstimatorConfig, TargetRecord, angle_dft_estimate,
                         estimate_4d, extract_antenna_response,
                         rearrange_virtual_array)
from .tracking import (AvTracker, DemodResult, EkfTrack, ObservationVec,
                       PvTracker, TrackingConfig, demod_amplitude,
                       demod_delay_doppler, ekf_step, jacobian_h,
                       jacobian_h_fd, observe_h, orientation_estimate,
                       predict_range_velocity, remove_modulated_data_av,
                       transition_matrix, update_beta)
from .rate import (Codebook, DdChannelOperator, build_ddm_codebook,
                   build_qam_only_codebook, build_tdm_codebook,
                   mutual_information_mc)
from .harness import (MetricRow, RunConfig, cdf_extract, emit, is_hit,
                      load_config, run_hitrate_sweep, run_loopback,
                      run_rate_sweep, run_ser_sweep, run_tracking)

__version__ = "0.1.0"
