"""l_p FIR and IIR filter design by iterative reweighted least squares."""
from __future__ import annotations

from .estimators import LpFirRegressor, LpIirRegressor
from .fir import (
    ClsSpec,
    ConstraintReport,
    FactorizationError,
    FirFilter,
    build_step_desired,
    design_cls,
    design_complex_lp,
    design_freq_varying,
    design_linear_phase_lp,
    design_magnitude_fir,
    spectral_factorize,
)
from .grid import (
    DesiredResponse,
    FrequencyGrid,
    band_edges_from_f,
    build_grid,
    build_lowpass_desired,
    default_grid_size,
)
from .iir_l2 import (
    IirFilter,
    enforce_stability,
    iir_freq_response,
    jackson_design,
    prony_freq_design,
    quasilinearize,
    soewito_mode1,
    soewito_mode2,
)
from .iir_lp import (
    MagnitudeStageReport,
    design_iir_complex_lp,
    design_iir_freq_varying,
    design_iir_magnitude_lp,
    phase_update,
)
from .irls import (
    BBS,
    RUL,
    AdaptiveBBS,
    Basic,
    ConvergenceTrace,
    FreqVarying,
    IrlsConfig,
    Kahng,
    Karlovitz,
    make_strategy,
    run_irls,
)
from .linalg import RankDeficientError, solve_wls

__version__ = "0.1.0"

__all__ = [
    "AdaptiveBBS",
    "BBS",
    "Basic",
    "ClsSpec",
    "ConstraintReport",
    "ConvergenceTrace",
    "DesiredResponse",
    "FactorizationError",
    "FirFilter",
    "FreqVarying",
    "FrequencyGrid",
    "IirFilter",
    "IrlsConfig",
    "Kahng",
    "Karlovitz",
    "LpFirRegressor",
    "LpIirRegressor",
    "MagnitudeStageReport",
    "RUL",
    "RankDeficientError",
    "band_edges_from_f",
    "build_grid",
    "build_lowpass_desired",
    "build_step_desired",
    "default_grid_size",
    "design_cls",
    "design_complex_lp",
    "design_freq_varying",
    "design_iir_complex_lp",
    "design_iir_freq_varying",
    "design_iir_magnitude_lp",
    "design_linear_phase_lp",
    "design_magnitude_fir",
    "enforce_stability",
    "iir_freq_response",
    "jackson_design",
    "make_strategy",
    "phase_update",
    "prony_freq_design",
    "quasilinearize",
    "run_irls",
    "soewito_mode1",
    "soewito_mode2",
    "solve_wls",
    "spectral_factorize",
]
