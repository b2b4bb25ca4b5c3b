"""Put-call symmetry: dual measure, call pricing via the dual put.

The call under (spot, strike, q, delta) equals the put under the dual model
with spot and strike exchanged and the two rates swapped.  The exponential
jump family is closed under the dual transform, so both concrete families
stay inside the library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError
from .levy import Family, JumpSign, LevyModel
from .pricing import (
    ContinuationRegion,
    OptionKind,
    OptionSpec,
    Regime,
    ValuationResult,
    price_put,
)

__all__ = [
    "DualModel",
    "dual_levy_model",
    "dual_model",
    "mathring_model",
    "price_call",
    "call_boundaries",
]


@dataclass(frozen=True)
class DualModel:
    """Dual triplet with the discount and dividend rates exchanged."""

    model: LevyModel
    q_dual: float
    delta_dual: float


def dual_levy_model(model: LevyModel) -> LevyModel:
    """Exponentially tilted reflection: drift -mu - sigma^2, jumps flipped.

    For exponential jumps the tilt e^{-y} maps rate rho upward jumps into
    rate rho+1 (or rho-1 for the converse orientation) with intensity
    lam * rho / rho_new.
    """
    mu_dual = -model.mu - model.sigma * model.sigma
    if model.family is Family.BLACK_SCHOLES:
        return LevyModel(Family.BLACK_SCHOLES, mu=mu_dual, sigma=model.sigma)
    if model.jump_sign is JumpSign.SPECTRALLY_NEGATIVE:
        rho_dual = model.rho + 1.0
        sign = JumpSign.SPECTRALLY_POSITIVE
    else:
        if model.rho <= 1.0:
            raise InvalidParameterError(
                "dual of upward exponential jumps needs rho > 1"
            )
        rho_dual = model.rho - 1.0
        sign = JumpSign.SPECTRALLY_NEGATIVE
    lam_dual = model.lam * model.rho / rho_dual
    return LevyModel(
        Family.EXP_JUMP_DIFFUSION,
        mu=mu_dual,
        sigma=model.sigma,
        lam=lam_dual,
        rho=rho_dual,
        jump_sign=sign,
    )


def dual_model(model: LevyModel, q: float, delta: float) -> DualModel:
    """Dual problem data: tilted-reflected model with the rates exchanged.

    The dual discount rate is q - psi(1), which equals the original dividend
    rate whenever the model satisfies the martingale identity; computing it
    from the exponent keeps the transform exact for explicitly supplied
    drifts as well.
    """
    from .levy import laplace_exponent

    q_dual = q - laplace_exponent(model, 1.0)
    return DualModel(model=dual_levy_model(model), q_dual=q_dual, delta_dual=q)


def mathring_model(model: LevyModel) -> LevyModel:
    """Spectrally negative reflection of the dual model.

    Its right inverse at the swapped rate sits exactly one unit below the
    original right inverse, which the tests assert.
    """
    return dual_levy_model(model).reflected()


def call_boundaries(put_region: ContinuationRegion, s: float, K: float) -> ContinuationRegion:
    """Reflect dual-put boundaries through log(s) + log(K)."""
    pivot = math.log(s) + math.log(K)
    if put_region.regime is Regime.NO_EARLY_EXERCISE:
        return ContinuationRegion(regime=Regime.NO_EARLY_EXERCISE)
    if put_region.regime is Regime.SINGLE_HALF_LINE:
        return ContinuationRegion(
            regime=Regime.SINGLE_HALF_LINE,
            l_star=pivot - put_region.u_star,
        )
    return ContinuationRegion(
        regime=put_region.regime,
        l_star=pivot - put_region.u_star,
        u_star=pivot - put_region.l_star,
    )


def price_call(model: LevyModel, spec: OptionSpec) -> ValuationResult:
    """Price the perpetual call as the dual perpetual put.

    The reported ``phi_q`` and smooth-fit residuals are those of the dual put
    problem, whose boundaries map one-to-one onto the call boundaries.
    """
    if spec.kind is not OptionKind.CALL:
        raise InvalidParameterError("price_call expects a call contract")
    dual = dual_model(model, spec.q, spec.delta)
    dual_spec = OptionSpec(
        kind=OptionKind.PUT,
        strike=spec.spot,
        q=dual.q_dual,
        delta=dual.delta_dual,
        spot=spec.strike,
    )
    put_result = price_put(dual.model, dual_spec)
    region = call_boundaries(put_result.region, spec.spot, spec.strike)
    diagnostics = dict(put_result.diagnostics)
    diagnostics["via_dual_put"] = 1.0
    return ValuationResult(
        price=put_result.price,
        region=region,
        phi_q=put_result.phi_q,
        smooth_fit_residual_l=put_result.smooth_fit_residual_u,
        smooth_fit_residual_u=put_result.smooth_fit_residual_l,
        diagnostics=diagnostics,
    )
