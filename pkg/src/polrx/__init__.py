"""Desk-scale simulator of a polarization-diverse heterodyne CV-QKD receiver.

The package models the full measurement chain: an 8-PSK transmitter with a CW
pilot, a fiber channel with polarization drift and laser phase noise, a
polarization-diverse balanced heterodyne frontend with ADC quantization,
per-branch DSP recovery, an adaptive two-branch polarization combiner, and a
security layer that turns recovered quadrature points into a secret key
fraction.  :mod:`polrx.session` ties the modules into reproducible
multi-snapshot measurement sessions; :mod:`polrx.cli` exposes them on the
command line.
"""

from polrx.channel import (
    ChannelConfig,
    JonesTrajectory,
    ScramblerPol,
    StaticPol,
    WienerPol,
    apply_channel,
    haar_unitary,
    make_jones_trajectory,
    transmission,
)
from polrx.cma import (
    CmaConfig,
    CmaResult,
    ConstellationFrame,
    cma_error_trace_stats,
    cma_run,
    noise_gain,
)
from polrx.dsp import (
    BranchRecovery,
    DspConfig,
    clock_resample,
    estimate_pilot_freq,
    matched_filter,
    phase_compensate,
    pilot_phase,
    recover_branch,
)
from polrx.errors import (
    CalibrationError,
    ClippingError,
    DegenerateInputError,
    DivergenceError,
    EstimateDegenerateError,
    FockCutoffError,
    NumericalDomainError,
    ParameterError,
    PilotNotFoundError,
    PolrxError,
    SyncFailureError,
)
from polrx.frontend import (
    DualPolCapture,
    FrontendConfig,
    capture_noise,
    detect,
    load_capture,
    matched_conversion_gain,
    save_capture,
)
from polrx.security import (
    ChannelEstimate,
    NoiseCalibration,
    SecurityParams,
    SecuritySnapshot,
    calibrate_variances,
    ensemble_correlation,
    ensemble_spectrum,
    estimate_channel,
    frame_sync,
    holevo_bound,
    key_rate,
    mutual_info,
    quadrature_variance,
    snu_normalize,
    von_neumann_g,
)
from polrx.session import (
    CSV_COLUMNS,
    SCHEMA_VERSION,
    SessionConfig,
    SessionResult,
    SnapshotResult,
    load_session_config,
    run_calibration,
    run_session,
    run_snapshot,
    session_config_from_dict,
    session_config_to_dict,
    summarize_session,
    write_snapshot_csv,
    write_summary_json,
)
from polrx.signals import (
    ComplexSignal,
    FirTaps,
    RealSignal,
    design_bandpass,
    design_lowpass,
    design_rrc,
    fir_apply,
    mix,
    power_spectrum,
)
from polrx.transmitter import (
    SymbolFrame,
    TxConfig,
    gen_symbols,
    modulate,
    psk_points,
    scale_to_photons,
)

__version__ = "0.1.0"
