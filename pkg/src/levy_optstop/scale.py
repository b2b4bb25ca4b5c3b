"""Scale function W, its derivatives and the killed-resolvent density.

Both model families admit scale functions that are finite sums of
(polynomial x exponential) terms built from the real roots of psi(phi) = q
for the spectrally negative representative.  The closed forms stay valid for
q < 0 as long as those roots are real; no analytic continuation is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from scipy.integrate import quad

from .errors import DomainError, MissingPhiError
from .levy import LevyModel, psi_equation_roots, sn_exponent, sn_exponent_derivative

__all__ = [
    "ScaleEval",
    "ScaleBasis",
    "make_scale_basis",
    "scale_eval",
    "resolvent_density",
    "laplace_identity_residual",
]

# Two roots closer than this merge into the confluent (L'Hopital) form.  The
# simple-root expansion amplifies root error like 1/gap^2, so the switch sits
# where the confluent form's own truncation error (~(gap*x)^2/6) is still tiny.
_CONFLUENT_TOL = 3e-4


@dataclass(frozen=True)
class ScaleEval:
    """W(x) and its first two derivatives; identically zero for x < 0."""

    w: float
    w_prime: float
    w_double_prime: float


@dataclass(frozen=True)
class ScaleBasis:
    """Precomputed representation W(x) = sum_i (c0_i + c1_i x) exp(beta_i x).

    ``roots`` and ``psi_primes`` describe the simple-root expansion used by
    the closed-form resolvent integrals; they are empty when the basis is
    confluent (nearly repeated roots) and callers must then integrate
    numerically.
    """

    phi_q: float
    betas: tuple[float, ...]
    c0: tuple[float, ...]
    c1: tuple[float, ...]
    roots: tuple[float, ...]
    psi_primes: tuple[float, ...]
    confluent: bool


def make_scale_basis(model: LevyModel, q: float) -> ScaleBasis:
    """Root-based expansion of W for (model, q); raises if phi(q) is absent."""
    roots = psi_equation_roots(model, q)
    if roots.phi_q is None or not roots.all_real:
        raise MissingPhiError(
            f"scale function undefined: psi(phi) = {q} has no full set of real roots"
        )
    all_roots = sorted(roots.all_roots)
    clusters = _cluster_roots(all_roots)

    betas: list[float] = []
    c0: list[float] = []
    c1: list[float] = []
    confluent = any(len(c) > 1 for c in clusters)

    if not confluent:
        for r in all_roots:
            betas.append(r)
            c0.append(1.0 / sn_exponent_derivative(model, r))
            c1.append(0.0)
        return ScaleBasis(
            phi_q=roots.phi_q,
            betas=tuple(betas),
            c0=tuple(c0),
            c1=tuple(c1),
            roots=tuple(sorted(all_roots, reverse=True)),
            psi_primes=tuple(sn_exponent_derivative(model, r) for r in sorted(all_roots, reverse=True)),
            confluent=False,
        )

    sn = model.sn_representative()
    half_s2 = 0.5 * sn.sigma * sn.sigma
    if len(clusters) == 1 and len(clusters[0]) == 2:
        # Black-Scholes tangency: 1/(psi - q) = 1/(half_s2 (phi - b)^2).
        b = sum(clusters[0]) / 2.0
        betas, c0, c1 = [b], [0.0], [1.0 / half_s2]
    elif len(clusters) == 2:
        pair = next(c for c in clusters if len(c) == 2)
        (single,) = next(c for c in clusters if len(c) == 1)
        b = sum(pair) / 2.0
        rho = sn.rho
        gap = single - b
        a_coef = (single + rho) / (half_s2 * gap * gap)
        betas = [single, b]
        c0 = [a_coef, -a_coef]
        c1 = [0.0, (b + rho) / (half_s2 * (b - single))]
    else:
        raise MissingPhiError("triple root of the exponent equation is not supported")

    return ScaleBasis(
        phi_q=roots.phi_q,
        betas=tuple(betas),
        c0=tuple(c0),
        c1=tuple(c1),
        roots=(),
        psi_primes=(),
        confluent=True,
    )


def _cluster_roots(sorted_roots: Iterable[float]) -> list[list[float]]:
    clusters: list[list[float]] = []
    for r in sorted_roots:
        if clusters and abs(r - clusters[-1][-1]) <= _CONFLUENT_TOL * max(1.0, abs(r)):
            clusters[-1].append(r)
        else:
            clusters.append([r])
    return clusters


def basis_eval(basis: ScaleBasis, x: float) -> tuple[float, float, float]:
    """(W, W', W'') at a scalar x; zero on the negative half-line."""
    if x < 0.0:
        return 0.0, 0.0, 0.0
    w = wp = wpp = 0.0
    for b, a0, a1 in zip(basis.betas, basis.c0, basis.c1):
        e = math.exp(b * x)
        poly = a0 + a1 * x
        w += poly * e
        wp += (b * poly + a1) * e
        wpp += (b * b * poly + 2.0 * b * a1) * e
    return w, wp, wpp



def scale_eval(model: LevyModel, q: float, x: float) -> ScaleEval:
    """W(x) with first and second derivatives from the closed root expansion."""
    if not math.isfinite(x):
        raise DomainError("x must be finite")
    basis = make_scale_basis(model, q)
    w, wp, wpp = basis_eval(basis, x)
    return ScaleEval(w=w, w_prime=wp, w_double_prime=wpp)


def resolvent_density(model: LevyModel, q: float, x: float, z: float) -> float:
    """Density of the q-discounted occupation measure killed on exiting [0, inf)."""
    if x < 0.0 or z < 0.0:
        raise DomainError("resolvent density needs x >= 0 and z >= 0")
    basis = make_scale_basis(model, q)
    w_x, _, _ = basis_eval(basis, x)
    w_shift, _, _ = basis_eval(basis, x - z)
    return math.exp(-basis.phi_q * z) * w_x - w_shift


def laplace_identity_residual(model: LevyModel, q: float, phi: float) -> float:
    """|integral_0^U exp(-phi u) W(u) du - 1/(psi(phi) - q)| as a self-check.

    U is chosen so the truncated tail is below 1e-10; the quadrature runs at
    absolute tolerance 1e-12.
    """
    basis = make_scale_basis(model, q)
    if phi <= basis.phi_q:
        raise DomainError(f"need phi > Phi(q) = {basis.phi_q}, got {phi}")
    upper = max(50.0, 40.0 / (phi - basis.phi_q))

    def integrand(u: float) -> float:
        w, _, _ = basis_eval(basis, u)
        return math.exp(-phi * u) * w

    integral, _ = quad(integrand, 0.0, upper, epsabs=1e-12, epsrel=1e-12, limit=10000)
    target = 1.0 / (sn_exponent(model, phi) - q)
    return abs(integral - target)
