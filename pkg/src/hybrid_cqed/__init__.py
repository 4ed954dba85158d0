"""Driven cavity / mechanical-resonator / qubit hybrid: steady states, weak-probe
transmission and second-order coherence of the output field."""
from .coherence import CoherenceSeries, g2_of_tau, temperature_trend, y_integrals
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateParameterError,
    HybridError,
    IntegrationError,
    SingularSystemError,
    UnknownPresetError,
)
from .fluctuations import (
    NoiseModel,
    OutputCoeffs,
    SpectralKernels,
    TransferCoeffs,
    efrst_coeffs,
    output_coeffs,
    thermal_spectrum,
    transfer_coeffs,
    transfer_linear_solve,
)
from .model import (
    CONSTANTS,
    PRESET_NAMES,
    Detunings,
    DriveConfig,
    GridSpec,
    Preset,
    SystemParams,
    derive_detunings,
    load_config,
    load_preset,
    validate_params,
)
from .probe import (
    LambdaSet,
    ProbeResponse,
    ResponseSweep,
    c_minus_closed_form,
    epsilon_out,
    lambda_coeffs,
    response_linear_solve,
    sweep_response,
)
from .steady import BistabilityBranches, SteadyState, bistability_scan, solve_steady_state
from .timedomain import demodulate, integrate_mean_field, validate_suite

__all__ = [name for name in dir() if not name.startswith("_")]
