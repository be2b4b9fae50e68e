"""Heralded optical cat states under detector timing jitter.

Simulation of heralded non-Gaussian state generation with a finite
detector timing resolution, including temporal-mode extraction, synthetic
homodyne records and maximum-likelihood tomography of the result.
"""

__version__ = "0.1.0"

from .errors import (
    CalibrationRangeError,
    ConfigError,
    GridCoverageError,
    InsufficientDataError,
    ModeWidthWarning,
    PhysicsError,
    TruncationError,
)
from .fock import (
    FockDensity,
    FockState,
    WignerGrid,
    cat_state,
    coherent_state,
    fock_basis_state,
    loss_channel,
    photon_number_distribution,
    photon_subtract,
    quadrature_pdf,
    squeezed_vacuum,
    wigner,
    wigner_origin_parity,
    wigner_point,
)
from .modes import (
    JitterDistribution,
    JitterKernel,
    ModeFunction,
    PrincipalModeResult,
    TimeGrid,
    default_grid,
    filter_response,
    fwhm,
    jitter_delta,
    jitter_gate_profile,
    jitter_gaussian,
    jitter_kernel,
    jitter_rectangular,
    opo_correlation,
    principal_mode,
    wavepacket,
)
from .herald import (
    CalibrationResult,
    HeraldConfig,
    HeraldResult,
    JitterSpec,
    build_heralded_state,
    calibrate_efficiency,
    default_record_grid,
    jitter_sweep,
)
from .tomography import (
    DEFAULT_PHASES,
    BootstrapResult,
    HomodyneRecord,
    QuadratureSampleSet,
    TomographyResult,
    bootstrap_wmin,
    covariance_pca,
    mle_reconstruct,
    project_quadratures,
    sample_quadratures,
    synthesize_records,
    wigner_min_near_origin,
)

__all__ = [name for name in dir() if not name.startswith("_")]
