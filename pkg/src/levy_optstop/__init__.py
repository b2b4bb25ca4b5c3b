"""Perpetual American and Swing option pricing in spectrally one-sided Levy markets.

Handles negative effective discount rates, where exercise is postponed both
out of the money and too deep in the money (a double continuation region),
with closed-form scale-function machinery for the Black-Scholes and
exponential jump-diffusion families and a Monte Carlo cross-validation
oracle.
"""

from .errors import (
    DomainError,
    FinitenessError,
    InvalidParameterError,
    LevyOptStopError,
    MissingPhiError,
    OptimizerError,
    PoleProximityError,
)
from .levy import (
    Family,
    JumpSign,
    LevyModel,
    RootSet,
    implied_drift,
    laplace_exponent,
    laplace_exponent_derivative,
    model_from_rates,
    phi_right_inverse,
    psi_equation_roots,
)
from .mc import McConfig, McEstimate, mc_entrance_value, simulate_increment, simulate_increments
from .pricing import (
    ContinuationRegion,
    OptionKind,
    OptionSpec,
    Regime,
    ValuationResult,
    classify_region,
    numeric_boundary_search,
    optimize_put_boundaries,
    price_put,
    put_entrance_value,
    put_entrance_value_dx,
    put_value_curve,
    smooth_fit_residual,
)
from .scale import ScaleEval, laplace_identity_residual, resolvent_density, scale_eval
from .swing import (
    Refraction,
    RefractionKind,
    SwingResult,
    SwingSpec,
    refraction_payoff,
    solve_level,
    solve_swing,
)
from .symmetry import DualModel, call_boundaries, dual_levy_model, dual_model, mathring_model, price_call

__version__ = "0.1.0"

__all__ = [
    "Family",
    "JumpSign",
    "LevyModel",
    "RootSet",
    "ScaleEval",
    "OptionKind",
    "OptionSpec",
    "Regime",
    "ContinuationRegion",
    "ValuationResult",
    "DualModel",
    "Refraction",
    "RefractionKind",
    "SwingSpec",
    "SwingResult",
    "McConfig",
    "McEstimate",
    "LevyOptStopError",
    "InvalidParameterError",
    "PoleProximityError",
    "MissingPhiError",
    "FinitenessError",
    "OptimizerError",
    "DomainError",
    "implied_drift",
    "laplace_exponent",
    "laplace_exponent_derivative",
    "phi_right_inverse",
    "psi_equation_roots",
    "model_from_rates",
    "scale_eval",
    "resolvent_density",
    "laplace_identity_residual",
    "put_entrance_value",
    "put_entrance_value_dx",
    "optimize_put_boundaries",
    "numeric_boundary_search",
    "classify_region",
    "price_put",
    "smooth_fit_residual",
    "put_value_curve",
    "dual_levy_model",
    "dual_model",
    "mathring_model",
    "price_call",
    "call_boundaries",
    "refraction_payoff",
    "solve_level",
    "solve_swing",
    "simulate_increment",
    "simulate_increments",
    "mc_entrance_value",
]
