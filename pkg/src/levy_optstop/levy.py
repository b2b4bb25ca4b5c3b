"""Spectrally one-sided Levy model families: exponents, roots, right inverse.

Two concrete families are supported: linear Brownian motion (Black-Scholes)
and a jump diffusion whose jumps are exponentially distributed on one side.
All fluctuation machinery (scale functions, entrance identities) is expressed
through the spectrally negative representative of a model; a spectrally
positive model is handled by reflecting it (negating drift and jump sign).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import InvalidParameterError, PoleProximityError

__all__ = [
    "Family",
    "JumpSign",
    "LevyModel",
    "RootSet",
    "implied_drift",
    "laplace_exponent",
    "laplace_exponent_derivative",
    "phi_right_inverse",
    "psi_equation_roots",
    "model_from_rates",
]

# Relative tolerance on |psi(root) - q| accepted for a polished root.
_ROOT_RESIDUAL_TOL = 1e-12


class Family(enum.Enum):
    BLACK_SCHOLES = "black_scholes"
    EXP_JUMP_DIFFUSION = "exp_jump_diffusion"


class JumpSign(enum.Enum):
    SPECTRALLY_NEGATIVE = "spectrally_negative"
    SPECTRALLY_POSITIVE = "spectrally_positive"


@dataclass(frozen=True)
class LevyModel:
    """Immutable model description for the log-price process.

    ``mu`` is the drift of the process itself (not of its reflection),
    ``sigma`` the Gaussian volatility, ``lam`` the jump arrival intensity and
    ``rho`` the rate of the exponential jump sizes.  ``jump_sign`` states the
    side on which the jumps occur; a Black-Scholes model has no jumps and is
    canonicalized to the spectrally negative convention.
    """

    family: Family
    mu: float
    sigma: float
    lam: float = 0.0
    rho: float = 1.0
    jump_sign: JumpSign = JumpSign.SPECTRALLY_NEGATIVE

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu):
            raise InvalidParameterError("drift mu must be finite")
        if not (self.sigma > 0.0):
            # sigma = 0 breaks creeping terms and C^1 scale functions; rejected.
            raise InvalidParameterError("sigma must be strictly positive")
        if self.family is Family.BLACK_SCHOLES:
            if self.lam != 0.0:
                raise InvalidParameterError("Black-Scholes model must have lam = 0")
            object.__setattr__(self, "jump_sign", JumpSign.SPECTRALLY_NEGATIVE)
        elif self.family is Family.EXP_JUMP_DIFFUSION:
            if not (self.lam > 0.0):
                raise InvalidParameterError("jump diffusion requires lam > 0")
            if not (self.rho > 0.0):
                raise InvalidParameterError("jump diffusion requires rho > 0")
        else:  # pragma: no cover - enum is closed
            raise InvalidParameterError(f"unknown family {self.family}")

    @property
    def has_jumps(self) -> bool:
        return self.family is Family.EXP_JUMP_DIFFUSION

    @property
    def is_spectrally_positive(self) -> bool:
        return self.jump_sign is JumpSign.SPECTRALLY_POSITIVE

    @property
    def mean_log_drift(self) -> float:
        """Expected log-price change per unit time of the actual process."""
        if not self.has_jumps:
            return self.mu
        jump_mean = self.lam / self.rho
        return self.mu + (jump_mean if self.is_spectrally_positive else -jump_mean)

    def reflected(self) -> LevyModel:
        """The negated process: drift flips sign, jumps change side."""
        if self.family is Family.BLACK_SCHOLES:
            return replace(self, mu=-self.mu)
        flipped = (
            JumpSign.SPECTRALLY_POSITIVE
            if self.jump_sign is JumpSign.SPECTRALLY_NEGATIVE
            else JumpSign.SPECTRALLY_NEGATIVE
        )
        return replace(self, mu=-self.mu, jump_sign=flipped)

    def sn_representative(self) -> LevyModel:
        """The spectrally negative process carrying the scale machinery."""
        return self.reflected() if self.is_spectrally_positive else self


@dataclass(frozen=True)
class RootSet:
    """Real solutions of psi(phi) = q for the spectrally negative representative.

    ``phi_q`` is the right inverse (largest root right of the last asymptote)
    when it exists.  ``negative_roots`` holds the remaining real roots in
    descending order.  ``all_real`` records whether the jump-diffusion cubic
    has three real roots (always true for Black-Scholes when phi_q exists).
    """

    phi_q: Optional[float]
    negative_roots: tuple[float, ...] = field(default_factory=tuple)
    all_real: bool = False

    @property
    def all_roots(self) -> tuple[float, ...]:
        roots = tuple(self.negative_roots)
        if self.phi_q is not None:
            roots = (self.phi_q,) + roots
        return roots


def implied_drift(
    family: Family,
    sigma: float,
    lam: float,
    rho: float,
    q: float,
    delta: float,
    jump_sign: JumpSign = JumpSign.SPECTRALLY_NEGATIVE,
) -> float:
    """Drift making the discounted, dividend-adjusted asset a martingale.

    Solves psi(1) = q - delta for mu given the remaining model parameters.
    """
    if not (sigma > 0.0):
        raise InvalidParameterError("sigma must be strictly positive")
    base = q - delta - 0.5 * sigma * sigma
    if family is Family.BLACK_SCHOLES or lam == 0.0:
        return base
    if not (rho > 0.0):
        raise InvalidParameterError("rho must be strictly positive")
    if jump_sign is JumpSign.SPECTRALLY_NEGATIVE:
        return base - lam * rho / (1.0 + rho) + lam
    # Upward jumps: e^{X_1} must be integrable, which needs rho > 1.
    if rho <= 1.0:
        raise InvalidParameterError(
            "spectrally positive jumps need rho > 1 for the martingale condition"
        )
    return base - lam * rho / (rho - 1.0) + lam


def _sn_exponent(mu: float, sigma: float, lam: float, rho: float, phi: float) -> float:
    """Exponent of a spectrally negative model (rational continuation past the pole)."""
    out = mu * phi + 0.5 * sigma * sigma * phi * phi
    if lam > 0.0:
        if abs(phi + rho) < 1e-12:
            raise PoleProximityError(f"phi = {phi} is too close to the pole at {-rho}")
        out += lam * rho / (phi + rho) - lam
    return out


def _sn_exponent_derivative(mu: float, sigma: float, lam: float, rho: float, phi: float) -> float:
    out = mu + sigma * sigma * phi
    if lam > 0.0:
        if abs(phi + rho) < 1e-12:
            raise PoleProximityError(f"phi = {phi} is too close to the pole at {-rho}")
        out -= lam * rho / (phi + rho) ** 2
    return out


def laplace_exponent(model: LevyModel, phi: float) -> float:
    """log E[exp(phi * X_1)] for the model's own orientation."""
    sn = model.sn_representative()
    arg = -phi if model.is_spectrally_positive else phi
    return _sn_exponent(sn.mu, sn.sigma, sn.lam, sn.rho, arg)


def laplace_exponent_derivative(model: LevyModel, phi: float) -> float:
    """Exact derivative of the Laplace exponent in phi."""
    sn = model.sn_representative()
    if model.is_spectrally_positive:
        return -_sn_exponent_derivative(sn.mu, sn.sigma, sn.lam, sn.rho, -phi)
    return _sn_exponent_derivative(sn.mu, sn.sigma, sn.lam, sn.rho, phi)


def sn_exponent(model: LevyModel, phi: float) -> float:
    """Exponent of the spectrally negative representative (used by scale functions)."""
    sn = model.sn_representative()
    return _sn_exponent(sn.mu, sn.sigma, sn.lam, sn.rho, phi)


def sn_exponent_derivative(model: LevyModel, phi: float) -> float:
    sn = model.sn_representative()
    return _sn_exponent_derivative(sn.mu, sn.sigma, sn.lam, sn.rho, phi)


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _cardano_real_roots(a3: float, a2: float, a1: float, a0: float) -> tuple[list[float], bool]:
    """Real roots of a cubic via Cardano's formula.

    Returns (roots, all_real).  Near-zero discriminants fall back to bracketed
    bisection on the cubic's monotone pieces to dodge cancellation.
    """
    b = a2 / a3
    c = a1 / a3
    d = a0 / a3
    p = c - b * b / 3.0
    qd = d - b * c / 3.0 + 2.0 * b ** 3 / 27.0
    disc = (qd / 2.0) ** 2 + (p / 3.0) ** 3
    scale = max(1.0, abs(p) ** 3 / 27.0, qd * qd / 4.0)

    if abs(disc) < 1e-12 * scale:
        roots = _bisect_cubic_roots(a3, a2, a1, a0)
        if len(roots) == 2:
            # Tangency: the root sitting at a critical point has multiplicity 2.
            cubic_d = lambda x: (3.0 * a3 * x + 2.0 * a2) * x + a1
            double = min(roots, key=lambda r: abs(cubic_d(r)))
            roots = sorted(roots + [double])
        return roots, len(roots) == 3

    if disc > 0.0:
        s = math.sqrt(disc)
        t = _cbrt(-qd / 2.0 + s) + _cbrt(-qd / 2.0 - s)
        roots = [t - b / 3.0]
        all_real = False
    else:
        # Three distinct real roots (trigonometric branch).
        r = math.sqrt(-p ** 3 / 27.0)
        theta = math.acos(max(-1.0, min(1.0, -qd / (2.0 * r))))
        m = 2.0 * math.sqrt(-p / 3.0)
        roots = [m * math.cos((theta + 2.0 * math.pi * k) / 3.0) - b / 3.0 for k in range(3)]
        all_real = True

    cubic = lambda x: ((a3 * x + a2) * x + a1) * x + a0
    cubic_d = lambda x: (3.0 * a3 * x + 2.0 * a2) * x + a1
    polished = []
    for x in roots:
        for _ in range(2):
            g = cubic_d(x)
            if g != 0.0:
                x = x - cubic(x) / g
        polished.append(x)
    return sorted(polished), all_real


def _bisect_cubic_roots(a3: float, a2: float, a1: float, a0: float) -> list[float]:
    """All real roots by bracketing between the critical points of the cubic."""
    cubic = lambda x: ((a3 * x + a2) * x + a1) * x + a0
    crit_disc = 4.0 * a2 * a2 - 12.0 * a3 * a1
    span = 1.0 + abs(a2 / a3) + abs(a1 / a3) + abs(a0 / a3)
    knots = [-span - 1.0]
    if crit_disc > 0.0:
        r = math.sqrt(crit_disc)
        knots.extend(sorted([(-2.0 * a2 - r) / (6.0 * a3), (-2.0 * a2 + r) / (6.0 * a3)]))
    knots.append(span + 1.0)
    roots = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        flo, fhi = cubic(lo), cubic(hi)
        if flo == 0.0:
            roots.append(lo)
            continue
        if flo * fhi > 0.0:
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = cubic(mid)
            if fm == 0.0 or (hi - lo) < 1e-16 * max(1.0, abs(mid)):
                break
            if flo * fm < 0.0:
                hi = mid
            else:
                lo, flo = mid, fm
        roots.append(0.5 * (lo + hi))
    # Dedupe near-identical roots from a tangency.
    out: list[float] = []
    for r in sorted(roots):
        if not out or abs(r - out[-1]) > 1e-10 * max(1.0, abs(r)):
            out.append(r)
    return out


def psi_equation_roots(model: LevyModel, q: float) -> RootSet:
    """Classify all real solutions of psi(phi) = q for the SN representative."""
    sn = model.sn_representative()
    mu, sigma, lam, rho = sn.mu, sn.sigma, sn.lam, sn.rho
    half_s2 = 0.5 * sigma * sigma

    if not model.has_jumps:
        disc = mu * mu + 2.0 * q * sigma * sigma
        disc_scale = max(mu * mu, 2.0 * abs(q) * sigma * sigma)
        if abs(disc) <= 1e-13 * disc_scale:
            # Tangency: a double root at the vertex of the parabola.
            center = -mu / (sigma * sigma)
            return RootSet(phi_q=center, negative_roots=(center,), all_real=True)
        if disc < 0.0:
            return RootSet(phi_q=None, negative_roots=(), all_real=False)
        root_gap = math.sqrt(disc) / (sigma * sigma)
        center = -mu / (sigma * sigma)
        hi, lo = center + root_gap, center - root_gap
        hi = _polish_root(model, q, hi)
        lo = _polish_root(model, q, lo) if root_gap > 0.0 else hi
        return RootSet(phi_q=hi, negative_roots=(lo,), all_real=True)

    # (psi(phi) - q)(phi + rho) = 0 expands to the cubic below.
    a3 = half_s2
    a2 = mu + half_s2 * rho
    a1 = mu * rho - lam - q
    a0 = -q * rho
    roots, all_real = _cardano_real_roots(a3, a2, a1, a0)
    roots = [_polish_root(model, q, r) for r in roots]
    right = sorted(r for r in roots if r > -rho)
    left = sorted((r for r in roots if r <= -rho), reverse=True)
    if not right:
        return RootSet(phi_q=None, negative_roots=tuple(left), all_real=False)
    phi_q = right[-1]
    others = tuple(sorted(right[:-1] + left, reverse=True))
    return RootSet(phi_q=phi_q, negative_roots=others, all_real=all_real and len(roots) == 3)


def _polish_root(model: LevyModel, q: float, x: float) -> float:
    """One or two Newton steps on psi(phi) - q around a root estimate."""
    for _ in range(2):
        try:
            f = sn_exponent(model, x) - q
            g = sn_exponent_derivative(model, x)
        except PoleProximityError:
            return x
        if g == 0.0:
            return x
        step = f / g
        x_new = x - step
        if model.has_jumps:
            # Stay on the same side of the pole.
            rho = model.sn_representative().rho
            if (x > -rho) != (x_new > -rho):
                return x
        x = x_new
        if abs(step) < 1e-15 * max(1.0, abs(x)):
            break
    return x


def phi_right_inverse(model: LevyModel, q: float) -> Optional[float]:
    """Largest real solution of psi(phi) = q right of the last asymptote.

    Returned for the spectrally negative representative; ``None`` encodes
    "no early exercise" downstream rather than an error.
    """
    roots = psi_equation_roots(model, q)
    if roots.phi_q is None:
        return None
    residual = abs(sn_exponent(model, roots.phi_q) - q)
    if residual > _ROOT_RESIDUAL_TOL * max(1.0, abs(q)):
        return None
    return roots.phi_q


def model_from_rates(
    family: Family,
    sigma: float,
    q: float,
    delta: float,
    lam: float = 0.0,
    rho: float = 1.0,
    jump_sign: JumpSign = JumpSign.SPECTRALLY_NEGATIVE,
    mu: Optional[float] = None,
) -> LevyModel:
    """Build a model either from an explicit drift or from the martingale condition.

    An explicit ``mu`` wins over the (q, delta) parameterization.
    """
    if mu is None:
        mu = implied_drift(family, sigma, lam, rho, q, delta, jump_sign)
    return LevyModel(family=family, mu=mu, sigma=sigma, lam=lam, rho=rho, jump_sign=jump_sign)
