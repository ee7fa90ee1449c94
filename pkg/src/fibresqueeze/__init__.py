"""Quantum noise of femtosecond pulses in Kerr fibre: classical NLSE
propagation, linearized fluctuations, spectral-filtering and loop-mirror
squeezing, two-beam entanglement and a correlation-based key distribution
protocol."""

from .pulse import (
    ComplexEnvelope,
    FibreSpec,
    PulseSpec,
    SpectralEnvelope,
    TimeGrid,
    autocorrelation,
    fwhm,
    make_pulse,
    pulse_energy,
    spectrum,
)
from .nlse import (
    SolverConfig,
    calibrated_fibre,
    fundamental_soliton_energy,
    propagate,
    soliton_order,
)
from .quantum import (
    CovarianceMatrix,
    ModeSelector,
    SymplecticMap,
    output_covariance,
    photon_number_noise,
    propagate_with_noise,
    spectral_correlation_matrix,
)
from .detection import balanced_detection, knife_edge, shot_noise_calibration, squeezing_scan
from .nolm import NolmSpec, SingleModeState, effective_single_mode, nolm_energy_scan, nolm_output
from .entanglement import (
    TwoModeState,
    combine_on_beamsplitter,
    duan_criterion,
    quadrature_correlations,
    stokes_covariance,
)
from .qkd import (
    ChannelSpec,
    beamsplit_attack,
    detect_eavesdropper,
    raw_bit_rate,
    run_session,
    sift_key,
)

__version__ = "0.1.0"
