"""Path-simulation oracle for entrance-time values.

Paths are monitored on a dt grid near the stopping interval, with a
Brownian-bridge hitting test on jump-free sub-steps so single-barrier
crossings are detected exactly in distribution.  Far away from the interval
the Gaussian part is advanced in one exact block (the increment law over any
horizon is known), sized so that reaching the interval inside the block has
negligible probability; jump times are sampled from their exponential
inter-arrival law and never fall inside a block.

Every path owns a counter-derived RNG stream keyed by (seed, path index),
so results do not depend on execution order or thread count.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

# Pick a threading layer before numba initializes; the default TBB probe
# warns on this platform's TBB version.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

from numba import config as _numba_config
from numba import njit, prange, set_num_threads

from .errors import DomainError, InvalidParameterError
from .levy import LevyModel

__all__ = ["McConfig", "McEstimate", "simulate_increment", "simulate_increments", "mc_entrance_value"]

_THREAD_ENV = "LEVY_OPTSTOP_THREADS"


def _apply_thread_cap() -> None:
    cap = os.environ.get(_THREAD_ENV)
    if not cap:
        return
    try:
        n = int(cap)
    except ValueError:
        return
    if n > 0:
        # Clamp to the launch-time maximum; numba rejects anything above it.
        set_num_threads(max(1, min(n, _numba_config.NUMBA_NUM_THREADS)))


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    dt: float = 1e-3
    horizon: float = 200.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.paths < 100:
            raise InvalidParameterError("need at least 100 paths")
        if not (0.0 < self.dt <= 0.01):
            raise InvalidParameterError("dt must lie in (0, 0.01]")
        if self.horizon < 10.0:
            raise InvalidParameterError("horizon must be at least 10")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    truncated_fraction: float
    truncation_bound: float
    bias_warning: bool


def simulate_increments(model: LevyModel, dt: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """n independent draws of the log-price increment over dt, exact in law."""
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    out = model.mu * dt + model.sigma * math.sqrt(dt) * rng.standard_normal(n)
    if model.has_jumps:
        counts = rng.poisson(model.lam * dt, n)
        jump_sums = rng.standard_gamma(counts) / model.rho
        out = out + (jump_sums if model.is_spectrally_positive else -jump_sums)
    return out


def simulate_increment(model: LevyModel, dt: float, rng: np.random.Generator) -> float:
    return float(simulate_increments(model, dt, rng, 1)[0])


def mc_entrance_value(
    model: LevyModel,
    l: float,
    u: float,
    x: float,
    q: float,
    config: McConfig,
    strike: Optional[float] = None,
    payoff_curve: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> McEstimate:
    """Estimate E[e^{-q tau} payoff(X_tau); tau <= horizon] for tau = entrance into [l, u].

    Exactly one of ``strike`` (put payoff (K - e^pos)^+) or ``payoff_curve``
    (piecewise-linear in log price) must be given.  Paths that never enter by
    the horizon contribute zero and are counted in ``truncated_fraction``;
    the reported ``truncation_bound`` is e^{|q| horizon} * max payoff *
    truncated_fraction.
    """
    if not (l <= u):
        raise DomainError("need l <= u")
    if (strike is None) == (payoff_curve is None):
        raise DomainError("give exactly one of strike or payoff_curve")
    _apply_thread_cap()

    if strike is not None:
        payoff_mode = 0
        k = float(strike)
        curve_x = np.zeros(1)
        curve_y = np.zeros(1)
        payoff_cap = k
    else:
        payoff_mode = 1
        k = 0.0
        curve_x = np.ascontiguousarray(payoff_curve[0], dtype=np.float64)
        curve_y = np.ascontiguousarray(payoff_curve[1], dtype=np.float64)
        payoff_cap = float(np.max(np.abs(curve_y)))

    values = np.empty(config.paths, dtype=np.float64)
    entered = np.empty(config.paths, dtype=np.uint8)
    jump_dir = 1.0 if model.is_spectrally_positive else -1.0
    _entrance_kernel(
        float(model.mu),
        float(model.sigma),
        float(model.lam),
        float(model.rho),
        jump_dir,
        float(l),
        float(u),
        float(x),
        float(q),
        float(config.dt),
        float(config.horizon),
        int(config.paths),
        np.uint64(config.seed),
        payoff_mode,
        k,
        curve_x,
        curve_y,
        values,
        entered,
    )
    mean = float(np.mean(values))
    n = config.paths
    std_error = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    truncated = float(1.0 - np.mean(entered))
    bound = math.exp(abs(q) * config.horizon) * payoff_cap * truncated
    return McEstimate(
        mean=mean,
        std_error=std_error,
        truncated_fraction=truncated,
        truncation_bound=bound,
        bias_warning=bound > 3.0 * std_error,
    )


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def _next_uniform(state):
    # splitmix64 stream; returns (new_state, uniform in (0, 1]).
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = _mix64(state)
    return state, (float(z >> np.uint64(11)) + 1.0) * (1.0 / 9007199254740992.0)


@njit(cache=True, parallel=True)
def _entrance_kernel(
    mu,
    sigma,
    lam,
    rho,
    jump_dir,
    l,
    u,
    x0,
    q,
    dt,
    horizon,
    n_paths,
    seed,
    payoff_mode,
    strike,
    curve_x,
    curve_y,
    out_values,
    out_entered,
):
    sqdt = math.sqrt(dt)
    fine_zone = 12.0 * sigma * sqdt
    s2dt = sigma * sigma * dt

    for j in prange(n_paths):
        state = (seed ^ np.uint64(0xD1B54A32D192ED03)) + np.uint64(j + 1) * np.uint64(
            0x9E3779B97F4A7C15
        )
        state = _mix64(state)
        spare = 0.0
        have_spare = False

        xx = x0
        t = 0.0
        entered = False
        pos = 0.0

        if l <= xx <= u:
            entered = True
            pos = xx
        else:
            if lam > 0.0:
                state, uj = _next_uniform(state)
                next_jump = -math.log(uj) / lam
            else:
                next_jump = 1e300

            while t < horizon:
                above = xx > u
                dist = (xx - u) if above else (l - xx)

                if dist > fine_zone:
                    # Exact Gaussian block that cannot plausibly reach the interval.
                    margin = dist - 0.5 * fine_zone
                    toward = -mu if above else mu
                    a = 8.0 * sigma
                    if toward > 0.0:
                        sq = (-a + math.sqrt(a * a + 4.0 * toward * margin)) / (2.0 * toward)
                        h = sq * sq
                    else:
                        sq = margin / a
                        h = sq * sq
                    h_lim = horizon - t
                    if next_jump - t < h_lim:
                        h_lim = next_jump - t
                    if h > h_lim:
                        h = h_lim
                    if h > dt:
                        # Draw one normal for the block.
                        if have_spare:
                            z = spare
                            have_spare = False
                        else:
                            state, u1 = _next_uniform(state)
                            state, u2 = _next_uniform(state)
                            r = math.sqrt(-2.0 * math.log(u1))
                            z = r * math.cos(6.283185307179586 * u2)
                            spare = r * math.sin(6.283185307179586 * u2)
                            have_spare = True
                        xx = xx + mu * h + sigma * math.sqrt(h) * z
                        t = t + h
                        # Defensive: the block was sized so this is ~impossible.
                        if above and xx <= u:
                            entered = True
                            pos = u
                            break
                        if (not above) and xx >= l:
                            entered = True
                            pos = l
                            break
                        if lam > 0.0 and t >= next_jump - 1e-15:
                            state, uj = _next_uniform(state)
                            xi = -math.log(uj) / rho
                            xx = xx + jump_dir * xi
                            state, uj = _next_uniform(state)
                            next_jump = next_jump - math.log(uj) / lam
                            if l <= xx <= u:
                                entered = True
                                pos = xx
                                break
                        continue
                    # Block shorter than dt: fall through to a fine step.

                # Fine step of length dt with a bridge test on the near barrier.
                if have_spare:
                    z = spare
                    have_spare = False
                else:
                    state, u1 = _next_uniform(state)
                    state, u2 = _next_uniform(state)
                    r = math.sqrt(-2.0 * math.log(u1))
                    z = r * math.cos(6.283185307179586 * u2)
                    spare = r * math.sin(6.283185307179586 * u2)
                    have_spare = True
                y = xx + mu * dt + sigma * sqdt * z
                jump_due = lam > 0.0 and next_jump <= t + dt

                if above:
                    if y <= u:
                        entered = True
                        pos = u
                        t = t + dt
                        break
                    if not jump_due:
                        arg = 2.0 * (xx - u) * (y - u) / s2dt
                        if arg < 40.0:
                            state, ub = _next_uniform(state)
                            if ub < math.exp(-arg):
                                entered = True
                                pos = u
                                t = t + dt
                                break
                else:
                    if y >= l:
                        entered = True
                        pos = l
                        t = t + dt
                        break
                    if not jump_due:
                        arg = 2.0 * (l - xx) * (l - y) / s2dt
                        if arg < 40.0:
                            state, ub = _next_uniform(state)
                            if ub < math.exp(-arg):
                                entered = True
                                pos = l
                                t = t + dt
                                break

                t = t + dt
                xx = y

                # Jumps due in this step (almost always zero or one).
                while lam > 0.0 and next_jump <= t:
                    state, uj = _next_uniform(state)
                    xi = -math.log(uj) / rho
                    xx = xx + jump_dir * xi
                    state, uj = _next_uniform(state)
                    next_jump = next_jump - math.log(uj) / lam
                    if l <= xx <= u:
                        entered = True
                        pos = xx
                        break
                if entered:
                    break

        if entered and t <= horizon:
            if payoff_mode == 0:
                pay = strike - math.exp(pos)
                if pay < 0.0:
                    pay = 0.0
            else:
                pay = np.interp(pos, curve_x, curve_y)
            out_values[j] = math.exp(-q * t) * pay
            out_entered[j] = 1
        else:
            out_values[j] = 0.0
            out_entered[j] = 0
