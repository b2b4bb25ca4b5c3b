import math

import pytest

from levy_optstop import (
    Family,
    JumpSign,
    LevyModel,
    OptionKind,
    OptionSpec,
    laplace_exponent,
    model_from_rates,
)

# Benchmark fixtures used throughout: a Black-Scholes market with a negative
# effective rate whose double-region boundaries are known in closed form, and
# an exponential jump-diffusion with explicitly chosen drift.
BS_SIGMA = 0.2
BS_Q = -0.01
BS_DELTA = -0.06
STRIKE = 1.2

JD_MU = 0.06
JD_SIGMA = 0.2
JD_LAM = 0.2
JD_RHO = 7.5
JD_Q = -0.01


@pytest.fixture(scope="session")
def bs_model() -> LevyModel:
    return model_from_rates(Family.BLACK_SCHOLES, BS_SIGMA, BS_Q, BS_DELTA)


@pytest.fixture(scope="session")
def bs_spec() -> OptionSpec:
    return OptionSpec(OptionKind.PUT, strike=STRIKE, q=BS_Q, delta=BS_DELTA, spot=0.8)


@pytest.fixture(scope="session")
def jd_model() -> LevyModel:
    return LevyModel(Family.EXP_JUMP_DIFFUSION, mu=JD_MU, sigma=JD_SIGMA, lam=JD_LAM, rho=JD_RHO)


@pytest.fixture(scope="session")
def jd_delta(jd_model) -> float:
    # Dividend rate implied by the martingale condition for the fixed drift.
    return JD_Q - laplace_exponent(jd_model, 1.0)


@pytest.fixture(scope="session")
def jd_spec(jd_model, jd_delta) -> OptionSpec:
    return OptionSpec(OptionKind.PUT, strike=STRIKE, q=JD_Q, delta=jd_delta, spot=0.8)


@pytest.fixture(scope="session")
def sp_model() -> LevyModel:
    return LevyModel(
        Family.EXP_JUMP_DIFFUSION,
        mu=JD_MU,
        sigma=JD_SIGMA,
        lam=JD_LAM,
        rho=JD_RHO,
        jump_sign=JumpSign.SPECTRALLY_POSITIVE,
    )


LOG_04 = math.log(0.4)
LOG_06 = math.log(0.6)
