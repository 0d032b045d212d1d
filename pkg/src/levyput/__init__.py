"""American put pricing and early-exercise boundary asymptotics under
exponential Levy models."""

from .models import (
    CompoundPoisson,
    ConvergenceError,
    DomainError,
    DoubleExponential,
    ExpMoments,
    GammaLike,
    JumpMeasure,
    LevyModel,
    LevyType,
    MarketParams,
    ModelError,
    NoJumps,
    TemperedStableNegative,
    characteristic_exponent,
    classify,
    d_plus,
    exp_moment_integrals,
    fv_drift,
    limit_critical_price,
    linear_phase_gamma,
    make_model,
    martingale_residual,
    phi0,
)
from .european import (
    EuropeanQuote,
    FourierPutPricer,
    black_scholes_put,
    european_boundary,
    price_put_fourier,
    price_put_mc,
)
from .simulation import (
    CheckReport,
    IncrementSampler,
    StableLimitReport,
    budget_epsilon,
    compensation_check,
    martingale_check,
    positive_part_growth,
    small_time_drift_check,
    stable_cf_exponent,
    stable_limit_check,
)
from .american import (
    BoundaryCurve,
    EepBoundReport,
    EepEstimate,
    Grid,
    PriceSurface,
    binomial_american_put,
    build_grid,
    eep_bound_check,
    eep_premium,
    extract_boundary,
    solve_variational_inequality,
)
from .asymptotics import (
    DivergenceReport,
    RateFit,
    RatePrediction,
    Regime,
    RegimeTag,
    detect_regime,
    divergence_check,
    fit_boundary_rate,
    predicted_gap,
    rate_prediction,
    stable_constants,
    stable_rate_constant,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    load_config,
)

__all__ = [
    "BoundaryCurve",
    "CheckReport",
    "CompoundPoisson",
    "ConfigError",
    "ConvergenceError",
    "DivergenceReport",
    "DomainError",
    "DoubleExponential",
    "EepBoundReport",
    "EepEstimate",
    "EuropeanQuote",
    "ExpMoments",
    "ExperimentConfig",
    "FourierPutPricer",
    "GammaLike",
    "Grid",
    "IncrementSampler",
    "JumpMeasure",
    "LevyModel",
    "LevyType",
    "MarketParams",
    "ModelError",
    "NoJumps",
    "PriceSurface",
    "RateFit",
    "RatePrediction",
    "Regime",
    "RegimeTag",
    "StableLimitReport",
    "TemperedStableNegative",
    "binomial_american_put",
    "black_scholes_put",
    "budget_epsilon",
    "build_grid",
    "characteristic_exponent",
    "classify",
    "compensation_check",
    "d_plus",
    "detect_regime",
    "divergence_check",
    "eep_bound_check",
    "eep_premium",
    "european_boundary",
    "exp_moment_integrals",
    "extract_boundary",
    "fit_boundary_rate",
    "fv_drift",
    "limit_critical_price",
    "linear_phase_gamma",
    "load_config",
    "make_model",
    "martingale_check",
    "martingale_residual",
    "phi0",
    "positive_part_growth",
    "predicted_gap",
    "price_put_fourier",
    "price_put_mc",
    "rate_prediction",
    "small_time_drift_check",
    "solve_variational_inequality",
    "stable_cf_exponent",
    "stable_constants",
    "stable_limit_check",
    "stable_rate_constant",
]

__version__ = "0.1.0"
