"""Mittag-Leffler generalizations of the Becquerel luminescence decay law."""

from __future__ import annotations

from lumidecay.decay_laws import (
    ArrheniusParams,
    BecquerelParams,
    BiExponentialParams,
    CurrentDecayParams,
    DecayModel,
    StretchedParams,
    arrhenius_rate,
    becquerel_intensity,
    biexponential_intensity,
    current_decay,
    eval_model,
    stretched_derivative,
    stretched_intensity,
    stretched_series_approx,
    validity_horizon,
)
from lumidecay.errors import (
    ConvergenceError,
    DomainError,
    InsufficientData,
    LumidecayError,
    NonConvergence,
    PrecisionError,
    QuadratureError,
    StepError,
)
from lumidecay.fitting import Comparison, FitResult, compare_models, fit
from lumidecay.frac_operator import (
    LogKernelOperator,
    QuadratureConfig,
    apply,
    apply_nu1,
    apply_semianalytic,
    residual_decay_eq,
)
from lumidecay.kinetics import (
    CurrentApprox,
    KineticsProblem,
    NonlinearOrder,
    TimeDependentRate,
    integrate,
)
from lumidecay.ml_core import EvalConfig, MLParams, ml_decay, ml_eval
from lumidecay.timeseries import TimeSeries

__all__ = [
    "ArrheniusParams",
    "BecquerelParams",
    "BiExponentialParams",
    "Comparison",
    "ConvergenceError",
    "CurrentApprox",
    "CurrentDecayParams",
    "DecayModel",
    "DomainError",
    "EvalConfig",
    "FitResult",
    "InsufficientData",
    "KineticsProblem",
    "LogKernelOperator",
    "LumidecayError",
    "MLParams",
    "NonConvergence",
    "NonlinearOrder",
    "PrecisionError",
    "QuadratureConfig",
    "QuadratureError",
    "StepError",
    "StretchedParams",
    "TimeDependentRate",
    "TimeSeries",
    "apply",
    "apply_nu1",
    "apply_semianalytic",
    "arrhenius_rate",
    "becquerel_intensity",
    "biexponential_intensity",
    "compare_models",
    "current_decay",
    "eval_model",
    "fit",
    "integrate",
    "ml_decay",
    "ml_eval",
    "residual_decay_eq",
    "stretched_derivative",
    "stretched_intensity",
    "stretched_series_approx",
    "validity_horizon",
]
