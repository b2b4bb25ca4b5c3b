"""Perpetual American put valuation under possibly negative discount rates.

The optimal exercise rule is the first entrance of the log price into an
interval [l, u].  The entrance value has three branches: the payoff inside,
a one-sided exit factor on the side the process approaches continuously, and
a jump-plus-creeping composition on the other side.  With exponential jumps
the jump branch factorizes into two closed-form one-dimensional integrals.

The boundary on the creeping side satisfies a first-order condition with an
explicit solution; the boundary on the jump side is found by a bracketed
root solve of the analytic derivative.  A derivative-free grid plus simplex
search is kept as an independent cross-check path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import DomainError, FinitenessError, OptimizerError
from .levy import Family, LevyModel, psi_equation_roots
from .scale import ScaleBasis, make_scale_basis

__all__ = [
    "OptionKind",
    "OptionSpec",
    "Regime",
    "ContinuationRegion",
    "ValuationResult",
    "put_entrance_value",
    "put_entrance_value_dx",
    "optimize_put_boundaries",
    "numeric_boundary_search",
    "classify_region",
    "price_put",
    "smooth_fit_residual",
    "put_value_curve",
]

# Top-two exponent roots closer than this are treated as a tangency (l* = u*).
_DEGENERATE_ROOT_TOL = 1e-6
# The upper boundary search stays strictly below log K.
_U_CAP_EPS = 1e-9


class OptionKind(enum.Enum):
    PUT = "put"
    CALL = "call"


class Regime(enum.Enum):
    NO_EARLY_EXERCISE = "no_early_exercise"
    SINGLE_HALF_LINE = "single_half_line"
    DOUBLE_REGION = "double_region"
    DEGENERATE_POINT = "degenerate_point"


@dataclass(frozen=True)
class OptionSpec:
    """Contract data; rates may both be negative."""

    kind: OptionKind
    strike: float
    q: float
    delta: float
    spot: float

    def __post_init__(self) -> None:
        if not (self.strike > 0.0):
            raise DomainError("strike must be positive")
        if not (self.spot > 0.0):
            raise DomainError("spot must be positive")

    @property
    def log_strike(self) -> float:
        return math.log(self.strike)

    @property
    def log_spot(self) -> float:
        return math.log(self.spot)


@dataclass(frozen=True)
class ContinuationRegion:
    """Exercise-regime classification with log-price boundaries where defined.

    For a put single half-line only ``u_star`` is set; for a call single
    half-line only ``l_star``.  A degenerate point has ``l_star == u_star``.
    """

    regime: Regime
    l_star: Optional[float] = None
    u_star: Optional[float] = None


@dataclass(frozen=True)
class ValuationResult:
    price: float
    region: ContinuationRegion
    phi_q: Optional[float]
    smooth_fit_residual_l: Optional[float]
    smooth_fit_residual_u: Optional[float]
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def price_available(self) -> bool:
        return math.isfinite(self.price)


# ---------------------------------------------------------------------------
# Evaluation context and closed-form building blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _PutContext:
    model: LevyModel
    q: float
    strike: float
    log_strike: float
    basis: ScaleBasis
    phi: float
    spectrally_positive: bool
    lam: float
    rho: float

    @property
    def has_jumps(self) -> bool:
        return self.lam > 0.0


def _make_context(model: LevyModel, q: float, strike: float) -> _PutContext:
    basis = make_scale_basis(model, q)
    sn = model.sn_representative()
    return _PutContext(
        model=model,
        q=q,
        strike=strike,
        log_strike=math.log(strike),
        basis=basis,
        phi=basis.phi_q,
        spectrally_positive=model.is_spectrally_positive,
        lam=sn.lam,
        rho=sn.rho,
    )


def _creep(ctx: _PutContext, w: float) -> float:
    """Discount factor for continuous passage onto the boundary at distance w.

    Equals (sigma^2/2)(W' - phi W)(w); the exp(phi w) component cancels term
    by term, which matters when phi > 0 and w is large.
    """
    phi = ctx.phi
    out = 0.0
    for beta, a0, a1 in zip(ctx.basis.betas, ctx.basis.c0, ctx.basis.c1):
        coef = (beta - phi) * (a0 + a1 * w) + a1
        out += coef * math.exp(beta * w)
    sigma = ctx.model.sigma
    return 0.5 * sigma * sigma * out


def _creep_prime(ctx: _PutContext, w: float) -> float:
    phi = ctx.phi
    out = 0.0
    for beta, a0, a1 in zip(ctx.basis.betas, ctx.basis.c0, ctx.basis.c1):
        coef = (beta - phi) * (a0 + a1 * w) + a1
        out += (beta * coef + (beta - phi) * a1) * math.exp(beta * w)
    sigma = ctx.model.sigma
    return 0.5 * sigma * sigma * out


def _iz(ctx: _PutContext, w: float) -> float:
    """Resolvent integrated against the jump tail: int r(w, z) lam rho e^{-rho z} dz.

    Written so the exp(phi w) components cancel analytically.
    """
    if ctx.lam == 0.0 or w <= 0.0:
        return 0.0
    lam, rho, phi = ctx.lam, ctx.rho, ctx.phi
    e_rho = math.exp(-rho * w)
    out = 0.0
    for beta, a0, a1 in zip(ctx.basis.betas, ctx.basis.c0, ctx.basis.c1):
        a = beta + rho
        d1 = 1.0 / (phi + rho) - 1.0 / a
        coef = (a0 + a1 * w) * d1 + a1 / (a * a)
        tail = a0 / a - a1 / (a * a)
        out += coef * math.exp(beta * w) + tail * e_rho
    return lam * rho * out


def _iz_prime(ctx: _PutContext, w: float) -> float:
    if ctx.lam == 0.0 or w < 0.0:
        return 0.0
    lam, rho, phi = ctx.lam, ctx.rho, ctx.phi
    e_rho = math.exp(-rho * w)
    out = 0.0
    for beta, a0, a1 in zip(ctx.basis.betas, ctx.basis.c0, ctx.basis.c1):
        a = beta + rho
        d1 = 1.0 / (phi + rho) - 1.0 / a
        coef = (a0 + a1 * w) * d1 + a1 / (a * a)
        tail = a0 / a - a1 / (a * a)
        out += (beta * coef + a1 * d1) * math.exp(beta * w) - rho * tail * e_rho
    return lam * rho * out


def _iy_down(ctx: _PutContext, l: float, u: float) -> float:
    """Jump-side payoff integral for downward jumps over the boundary u.

    int_0^inf exp(-phi((l-u+y) v 0)) (K - exp(l v (u-y))) e^{-rho y} dy.
    """
    k, rho, phi = ctx.strike, ctx.rho, ctx.phi
    delta = u - l
    inside = k * (-math.expm1(-rho * delta)) / rho - math.exp(u) * (
        -math.expm1(-(1.0 + rho) * delta)
    ) / (1.0 + rho)
    overshoot = (k - math.exp(l)) * math.exp(-rho * delta) / (phi + rho)
    return inside + overshoot


def _iy_down_du(ctx: _PutContext, l: float, u: float) -> float:
    k, rho, phi = ctx.strike, ctx.rho, ctx.phi
    delta = u - l
    e_rho = math.exp(-rho * delta)
    return (
        k * e_rho
        - math.exp(u) * (-math.expm1(-(1.0 + rho) * delta)) / (1.0 + rho)
        - math.exp(l) * e_rho
        - rho * (k - math.exp(l)) * e_rho / (phi + rho)
    )


def _iy_down_inf(ctx: _PutContext, u: float) -> float:
    """Limit of the downward-jump integral with the lower boundary removed."""
    return ctx.strike / ctx.rho - math.exp(u) / (1.0 + ctx.rho)


def _iy_up(ctx: _PutContext, l: float, u: float) -> float:
    """Jump-side payoff integral for upward jumps over the boundary l.

    int_0^inf exp(-phi((l-u+y) v 0)) (K - exp((l+y) ^ u)) e^{-rho y} dy.
    """
    k, rho, phi = ctx.strike, ctx.rho, ctx.phi
    delta = u - l
    if abs(rho - 1.0) < 1e-12:
        mid = math.exp(l) * delta
    else:
        mid = math.exp(l) * (-math.expm1(-(rho - 1.0) * delta)) / (rho - 1.0)
    inside = k * (-math.expm1(-rho * delta)) / rho - mid
    overshoot = (k - math.exp(u)) * math.exp(-rho * delta) / (phi + rho)
    return inside + overshoot


def _iy_up_dl(ctx: _PutContext, l: float, u: float) -> float:
    k, rho, phi = ctx.strike, ctx.rho, ctx.phi
    delta = u - l
    e_rho = math.exp(-rho * delta)
    if abs(rho - 1.0) < 1e-12:
        mid_term = -math.exp(l) * delta + math.exp(l)
    else:
        mid_term = (
            -math.exp(l) * (-math.expm1(-(rho - 1.0) * delta)) / (rho - 1.0)
            + math.exp(l) * math.exp(-(rho - 1.0) * delta)
        )
    return -k * e_rho + mid_term + rho * (k - math.exp(u)) * e_rho / (phi + rho)


# ---------------------------------------------------------------------------
# Entrance-time value and its spatial derivative
# ---------------------------------------------------------------------------


def put_entrance_value(model: LevyModel, spec: OptionSpec, l: float, u: float, x: float) -> float:
    """Value of the rule "exercise on first entrance of log-price into [l, u]"."""
    ctx = _make_context(model, spec.q, spec.strike)
    _check_interval(ctx, l, u)
    return _value_double(ctx, l, u, x)


def put_entrance_value_dx(model: LevyModel, spec: OptionSpec, l: float, u: float, x: float) -> float:
    """Analytic spatial derivative of the entrance value (one-sided at l, u)."""
    ctx = _make_context(model, spec.q, spec.strike)
    _check_interval(ctx, l, u)
    return _value_double_dx(ctx, l, u, x)


def _check_interval(ctx: _PutContext, l: float, u: float) -> None:
    if not (l <= u):
        raise DomainError("need l <= u")
    if not (u < ctx.log_strike):
        raise DomainError("need u < log(strike): exercising above the strike pays nothing")


def _value_double(ctx: _PutContext, l: float, u: float, x: float) -> float:
    k = ctx.strike
    if l <= x <= u:
        return k - math.exp(x)
    if not ctx.spectrally_positive:
        if x < l:
            return (k - math.exp(l)) * math.exp(-ctx.phi * (l - x))
        w = x - u
        value = (k - math.exp(u)) * _creep(ctx, w)
        if ctx.has_jumps:
            value += _iy_down(ctx, l, u) * _iz(ctx, w)
        return value
    if x > u:
        return (k - math.exp(u)) * math.exp(-ctx.phi * (x - u))
    w = l - x
    value = (k - math.exp(l)) * _creep(ctx, w)
    if ctx.has_jumps:
        value += _iy_up(ctx, l, u) * _iz(ctx, w)
    return value


def _value_double_dx(ctx: _PutContext, l: float, u: float, x: float) -> float:
    k = ctx.strike
    if l <= x <= u:
        return -math.exp(x)
    if not ctx.spectrally_positive:
        if x < l:
            return ctx.phi * (k - math.exp(l)) * math.exp(-ctx.phi * (l - x))
        w = x - u
        out = (k - math.exp(u)) * _creep_prime(ctx, w)
        if ctx.has_jumps:
            out += _iy_down(ctx, l, u) * _iz_prime(ctx, w)
        return out
    if x > u:
        return -ctx.phi * (k - math.exp(u)) * math.exp(-ctx.phi * (x - u))
    w = l - x
    out = (k - math.exp(l)) * _creep_prime(ctx, w)
    if ctx.has_jumps:
        out += _iy_up(ctx, l, u) * _iz_prime(ctx, w)
    return -out


def _value_single(ctx: _PutContext, u: float, x: float) -> float:
    """Half-line rule: stop on entering (-inf, u]."""
    k = ctx.strike
    if x <= u:
        return k - math.exp(x)
    w = x - u
    if ctx.spectrally_positive:
        return (k - math.exp(u)) * math.exp(-ctx.phi * w)
    value = (k - math.exp(u)) * _creep(ctx, w)
    if ctx.has_jumps:
        value += _iy_down_inf(ctx, u) * _iz(ctx, w)
    return value


def _value_single_dx(ctx: _PutContext, u: float, x: float) -> float:
    k = ctx.strike
    if x <= u:
        return -math.exp(x)
    w = x - u
    if ctx.spectrally_positive:
        return -ctx.phi * (k - math.exp(u)) * math.exp(-ctx.phi * w)
    out = (k - math.exp(u)) * _creep_prime(ctx, w)
    if ctx.has_jumps:
        out += _iy_down_inf(ctx, u) * _iz_prime(ctx, w)
    return out


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def classify_region(model: LevyModel, spec: OptionSpec) -> Regime:
    """Exercise-regime label for the contract.

    Puts follow one rule for both families: positive rates give the classical
    half-line, zero or negative rates require upward mean drift, and a
    negative rate yields a double region exactly when the right inverse of
    the exponent exists (a point when the defining roots are tangent).
    Calls in the Black-Scholes family follow the analogous matrix keyed on
    the dividend rate and the tilted slope psi'(1); jump-diffusion calls are
    classified through the dual put problem.
    """
    if spec.kind is OptionKind.PUT:
        return _classify_put(model, spec.q)
    if model.family is Family.BLACK_SCHOLES:
        return _classify_call_bs(model, spec.q, spec.delta)
    return _classify_call_jd(model, spec.q, spec.delta)


def _classify_put(model: LevyModel, q: float) -> Regime:
    drift = model.mean_log_drift
    if q > 0.0:
        return Regime.SINGLE_HALF_LINE
    if q == 0.0:
        return Regime.SINGLE_HALF_LINE if drift > 0.0 else Regime.NO_EARLY_EXERCISE
    if drift <= 0.0:
        return Regime.NO_EARLY_EXERCISE
    roots = psi_equation_roots(model, q)
    if roots.phi_q is None or not roots.all_real:
        return Regime.NO_EARLY_EXERCISE
    if roots.negative_roots and abs(roots.phi_q - roots.negative_roots[0]) <= _DEGENERATE_ROOT_TOL * max(
        1.0, abs(roots.phi_q)
    ):
        return Regime.DEGENERATE_POINT
    return Regime.DOUBLE_REGION


def _classify_call_bs(model: LevyModel, q: float, delta: float) -> Regime:
    # The call-side drift parameter is the exponent slope at 1 (the drift of
    # the measure-tilted reflection, negated).
    tilted = model.mu + model.sigma * model.sigma
    if q >= 0.0:
        return Regime.SINGLE_HALF_LINE if delta > 0.0 else Regime.NO_EARLY_EXERCISE
    if delta > 0.0:
        return Regime.SINGLE_HALF_LINE
    if delta == 0.0:
        return Regime.NO_EARLY_EXERCISE
    s2 = model.sigma * model.sigma
    disc = tilted * tilted + 2.0 * delta * s2
    disc_scale = max(tilted * tilted, 2.0 * abs(delta) * s2)
    if tilted >= 0.0 or disc < -1e-13 * disc_scale:
        return Regime.NO_EARLY_EXERCISE
    return Regime.DEGENERATE_POINT if abs(disc) <= 1e-13 * disc_scale else Regime.DOUBLE_REGION


def _classify_call_jd(model: LevyModel, q: float, delta: float) -> Regime:
    from .levy import laplace_exponent
    from .symmetry import dual_levy_model  # local import to avoid a cycle

    dual = dual_levy_model(model)
    # The dual discount rate; equals delta under the martingale identity.
    return _classify_put(dual, q - laplace_exponent(model, 1.0))


# ---------------------------------------------------------------------------
# Boundary optimization
# ---------------------------------------------------------------------------


def optimize_put_boundaries(
    model: LevyModel,
    spec: OptionSpec,
    probe_offset: float = 0.75,
    diagnostics: Optional[dict[str, float]] = None,
) -> ContinuationRegion:
    """Optimal exercise boundaries for the perpetual put.

    The creeping-side boundary solves its first-order condition in closed
    form; the jump-side boundary is the bracketed root of the analytic
    derivative of the entrance value.  Black-Scholes double regions use the
    fully closed-form pair.  ``probe_offset`` places the evaluation point of
    the jump-side condition; the solved boundary does not depend on it.
    A ``diagnostics`` dict, when given, receives the root-solver iteration
    count of the jump-side stage (zero for fully closed-form regimes).
    """
    regime = _classify_put(model, spec.q)
    if regime is Regime.NO_EARLY_EXERCISE:
        return ContinuationRegion(regime=regime)

    ctx = _make_context(model, spec.q, spec.strike)
    phi, k = ctx.phi, ctx.strike

    if regime is Regime.DEGENERATE_POINT:
        m = _creep_side_boundary(ctx)
        return ContinuationRegion(regime=regime, l_star=m, u_star=m)

    if regime is Regime.SINGLE_HALF_LINE:
        u_star, iters = _single_boundary(ctx, probe_offset)
        if diagnostics is not None:
            diagnostics["boundary_solver_iterations"] = float(iters)
        return ContinuationRegion(regime=regime, u_star=u_star)

    # Double region.
    if not ctx.spectrally_positive:
        l_star = _creep_side_boundary(ctx)
        if model.family is Family.BLACK_SCHOLES:
            u_star, iters = _bs_upper_boundary(ctx), 0
        else:
            u_star, iters = _solve_jump_side_upper(ctx, l_star, probe_offset)
        if diagnostics is not None:
            diagnostics["boundary_solver_iterations"] = float(iters)
        return ContinuationRegion(regime=regime, l_star=l_star, u_star=u_star)

    u_star = _creep_side_boundary(ctx)
    l_star, iters = _solve_jump_side_lower(ctx, u_star, probe_offset)
    if diagnostics is not None:
        diagnostics["boundary_solver_iterations"] = float(iters)
    return ContinuationRegion(regime=regime, l_star=l_star, u_star=u_star)


def _creep_side_boundary(ctx: _PutContext) -> float:
    """Smooth-fit boundary on the side reached by continuous passage."""
    phi, k = ctx.phi, ctx.strike
    if not ctx.spectrally_positive:
        # Entering at l from below: phi < 0 in the double regime.
        return math.log(k * phi / (phi - 1.0))
    # Entering at u from above: phi > 0 for the reflected representative.
    return math.log(k * phi / (phi + 1.0))


def _bs_upper_boundary(ctx: _PutContext) -> float:
    mu, sigma, k = ctx.model.mu, ctx.model.sigma, ctx.strike
    xi = math.sqrt(max(mu * mu + 2.0 * ctx.q * sigma * sigma, 0.0)) / (sigma * sigma)
    return math.log(k * (2.0 * xi - ctx.phi) / (2.0 * xi - ctx.phi + 1.0))


def _single_boundary(ctx: _PutContext, probe_offset: float = 0.75) -> tuple[float, int]:
    """Half-line boundary (classical regime, phi >= 0)."""
    k = ctx.strike
    if ctx.spectrally_positive:
        return math.log(k * ctx.phi / (ctx.phi + 1.0)), 0
    if not ctx.has_jumps:
        # Decay rate of the value above the boundary is the magnitude of the
        # lower exponent root.
        gamma = -min(ctx.basis.roots)
        return math.log(k * gamma / (gamma + 1.0)), 0
    probe = ctx.log_strike + probe_offset

    def deriv(u: float) -> float:
        w = probe - u
        return (
            -math.exp(u) / (1.0 + ctx.rho) * _iz(ctx, w)
            - _iy_down_inf(ctx, u) * _iz_prime(ctx, w)
            - math.exp(u) * _creep(ctx, w)
            - (ctx.strike - math.exp(u)) * _creep_prime(ctx, w)
        )

    lo, hi = ctx.log_strike - 12.0, ctx.log_strike - _U_CAP_EPS
    return _bracketed_root(deriv, lo, hi, lambda u: _value_single(ctx, u, probe))


def _solve_jump_side_upper(ctx: _PutContext, l_star: float, probe_offset: float = 0.75) -> tuple[float, int]:
    """Upper boundary for a spectrally negative double region."""
    probe = ctx.log_strike + probe_offset

    def deriv(u: float) -> float:
        w = probe - u
        return (
            _iy_down_du(ctx, l_star, u) * _iz(ctx, w)
            - _iy_down(ctx, l_star, u) * _iz_prime(ctx, w)
            - math.exp(u) * _creep(ctx, w)
            - (ctx.strike - math.exp(u)) * _creep_prime(ctx, w)
        )

    lo, hi = l_star, ctx.log_strike - _U_CAP_EPS
    return _bracketed_root(deriv, lo, hi, lambda u: _value_double(ctx, l_star, u, probe))


def _solve_jump_side_lower(ctx: _PutContext, u_star: float, probe_offset: float = 0.75) -> tuple[float, int]:
    """Lower boundary for a spectrally positive double region."""
    lo = ctx.log_strike - 14.0
    probe = lo - probe_offset

    def deriv(l: float) -> float:
        w = l - probe
        return (
            _iy_up_dl(ctx, l, u_star) * _iz(ctx, w)
            + _iy_up(ctx, l, u_star) * _iz_prime(ctx, w)
            - math.exp(l) * _creep(ctx, w)
            + (ctx.strike - math.exp(l)) * _creep_prime(ctx, w)
        )

    return _bracketed_root(deriv, lo, u_star - 1e-12, lambda l: _value_double(ctx, l, u_star, probe))


def _bracketed_root(
    deriv: Callable[[float], float],
    lo: float,
    hi: float,
    objective: Callable[[float], float],
) -> float:
    """Root of a first-order condition inside (lo, hi), chosen by objective value."""
    grid = np.linspace(lo + 1e-10, hi, 512)
    values = np.array([deriv(g) for g in grid])
    sign_flips = np.nonzero(np.diff(np.sign(values)) != 0)[0]
    best_root = None
    best_obj = -math.inf
    iterations = 0
    for idx in sign_flips:
        try:
            root, info = brentq(
                deriv, grid[idx], grid[idx + 1], xtol=1e-14, rtol=8.9e-16,
                maxiter=200, full_output=True,
            )
        except ValueError:
            continue
        iterations += info.iterations
        obj = objective(root)
        if obj > best_obj:
            best_obj, best_root = obj, root
    if best_root is None:
        raise OptimizerError(
            "no interior first-order point found for the jump-side boundary",
            best=(float(grid[int(np.argmax([objective(g) for g in grid]))]),),
        )
    return best_root, iterations


# ---------------------------------------------------------------------------
# Derivative-free cross-check optimizer
# ---------------------------------------------------------------------------


def numeric_boundary_search(
    model: LevyModel,
    spec: OptionSpec,
    grid_points: int = 200,
    probes: Optional[tuple[float, float]] = None,
) -> tuple[ContinuationRegion, dict[str, float]]:
    """Grid scan plus Nelder-Mead refinement over the boundary pair.

    Maximizes the sum of the entrance value at one probe below the search box
    and one above it; both probes share their maximizer, and the sum keeps
    each boundary identified for jump-free models.
    """
    regime = _classify_put(model, spec.q)
    if regime is not Regime.DOUBLE_REGION:
        raise DomainError("numeric search applies to the double-region regime")
    ctx = _make_context(model, spec.q, spec.strike)
    log_k = ctx.log_strike
    lo_edge = log_k - 6.0
    hi_edge = log_k - _U_CAP_EPS
    if probes is None:
        probes = (lo_edge - 1.0, log_k + 0.75)
    x_lo, x_hi = probes

    def objective(l: float, u: float) -> float:
        if not (lo_edge - 1e-9 <= l <= u <= hi_edge + 1e-12):
            return -math.inf
        return _value_double(ctx, l, u, x_lo) + _value_double(ctx, l, u, x_hi)

    axis = np.linspace(lo_edge, hi_edge, grid_points)
    grid_vals = np.full((grid_points, grid_points), -np.inf)
    for i, l in enumerate(axis):
        for j in range(i, grid_points):
            grid_vals[i, j] = objective(l, axis[j])
    flat_best = int(np.argmax(grid_vals))
    bi, bj = divmod(flat_best, grid_points)
    multimodal = _grid_multimodal(grid_vals, axis, bi, bj)

    res = minimize(
        lambda p: -objective(p[0], p[1]),
        x0=np.array([axis[bi], axis[bj]]),
        method="Nelder-Mead",
        options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 10_000, "maxfev": 20_000},
    )
    if res.nit >= 10_000 or not np.isfinite(res.fun):
        raise OptimizerError("simplex refinement hit the iteration cap", best=tuple(res.x))
    l_star, u_star = float(res.x[0]), float(min(res.x[1], hi_edge))
    diagnostics = {
        "iterations": float(res.nit),
        "multimodal": float(multimodal),
        "objective": float(-res.fun),
    }
    return ContinuationRegion(Regime.DOUBLE_REGION, l_star=l_star, u_star=u_star), diagnostics


def _grid_multimodal(grid_vals: np.ndarray, axis: np.ndarray, bi: int, bj: int) -> bool:
    """Second local maximum nearly tied with the best but far away in (l, u)."""
    best = grid_vals[bi, bj]
    n = grid_vals.shape[0]
    for i in range(n):
        row = grid_vals[i]
        for j in range(i, n):
            v = row[j]
            if not np.isfinite(v) or v < best - 1e-6:
                continue
            if max(abs(axis[i] - axis[bi]), abs(axis[j] - axis[bj])) <= 1e-3:
                continue
            if _is_grid_local_max(grid_vals, i, j):
                return True
    return False


def _is_grid_local_max(grid_vals: np.ndarray, i: int, j: int) -> bool:
    n = grid_vals.shape[0]
    v = grid_vals[i, j]
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            ii, jj = i + di, j + dj
            if 0 <= ii < n and 0 <= jj < n and np.isfinite(grid_vals[ii, jj]):
                if grid_vals[ii, jj] > v:
                    return False
    return True


# ---------------------------------------------------------------------------
# Pricing
# ---------------------------------------------------------------------------


def price_put(model: LevyModel, spec: OptionSpec) -> ValuationResult:
    """Price the perpetual put at the optimized boundaries.

    Raises FinitenessError when the mean log drift is not positive for the
    put orientation (the value may then be infinite).
    """
    if spec.kind is not OptionKind.PUT:
        raise DomainError("price_put expects a put contract")
    drift = model.mean_log_drift
    if drift <= 0.0:
        raise FinitenessError(
            f"put value may be infinite: mean log drift {drift:.6g} is not positive"
        )
    diagnostics: dict[str, float] = {"mean_log_drift": drift}
    region = optimize_put_boundaries(model, spec, diagnostics=diagnostics)

    if region.regime is Regime.NO_EARLY_EXERCISE:
        # The supremum is not attained by an entrance rule; no closed value.
        diagnostics["price_available"] = 0.0
        return ValuationResult(
            price=math.nan,
            region=region,
            phi_q=None,
            smooth_fit_residual_l=None,
            smooth_fit_residual_u=None,
            diagnostics=diagnostics,
        )

    ctx = _make_context(model, spec.q, spec.strike)
    diagnostics["price_available"] = 1.0
    diagnostics["phi_q_residual"] = abs(_psi_minus_q(model, ctx.phi, spec.q))
    if model.family is Family.BLACK_SCHOLES:
        diagnostics["xi"] = math.sqrt(
            max(model.mu * model.mu + 2.0 * spec.q * model.sigma * model.sigma, 0.0)
        ) / (model.sigma * model.sigma)

    x = spec.log_spot
    if region.regime is Regime.SINGLE_HALF_LINE:
        price = _value_single(ctx, region.u_star, x)
        res_u = _one_sided_gap_single(ctx, region.u_star)
        res_l = None
    else:
        price = _value_double(ctx, region.l_star, region.u_star, x)
        res_l, res_u = _one_sided_gaps_double(ctx, region.l_star, region.u_star)
    return ValuationResult(
        price=price,
        region=region,
        phi_q=ctx.phi,
        smooth_fit_residual_l=res_l,
        smooth_fit_residual_u=res_u,
        diagnostics=diagnostics,
    )


def _psi_minus_q(model: LevyModel, phi: float, q: float) -> float:
    from .levy import sn_exponent

    return sn_exponent(model, phi) - q


def _one_sided_gaps_double(ctx: _PutContext, l: float, u: float) -> tuple[float, float]:
    inside_l = -math.exp(l)
    inside_u = -math.exp(u)
    outside_l = _value_double_dx(ctx, l, u, math.nextafter(l, -math.inf))
    outside_u = _value_double_dx(ctx, l, u, math.nextafter(u, math.inf))
    return abs(inside_l - outside_l), abs(inside_u - outside_u)


def _one_sided_gap_single(ctx: _PutContext, u: float) -> float:
    inside = -math.exp(u)
    outside = _value_single_dx(ctx, u, math.nextafter(u, math.inf))
    return abs(inside - outside)


def smooth_fit_residual(
    model: LevyModel, spec: OptionSpec, region: ContinuationRegion
) -> tuple[float, float]:
    """One-sided derivative gaps |dv(l-)-dv(l+)| and |dv(u-)-dv(u+)|."""
    if region.regime is not Regime.DOUBLE_REGION:
        raise DomainError("smooth-fit residuals apply to the double-region regime")
    ctx = _make_context(model, spec.q, spec.strike)
    return _one_sided_gaps_double(ctx, region.l_star, region.u_star)


def put_value_curve(
    model: LevyModel, spec: OptionSpec, region: ContinuationRegion, xs: np.ndarray
) -> np.ndarray:
    """Entrance-rule value on an array of log prices for the given region."""
    xs = np.asarray(xs, dtype=float)
    if region.regime is Regime.NO_EARLY_EXERCISE:
        return np.full_like(xs, np.nan)
    ctx = _make_context(model, spec.q, spec.strike)
    if region.regime is Regime.SINGLE_HALF_LINE:
        return np.array([_value_single(ctx, region.u_star, float(x)) for x in xs])
    return np.array([_value_double(ctx, region.l_star, region.u_star, float(x)) for x in xs])
