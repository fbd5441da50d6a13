"""Radial p-harmonic profiles and neck flux bounds.

A radial profile

    psi(r) = a * r^beta + b,   beta = (p - d)/(p - 1)      (power branch)
    psi(r) = a * log(r) + b                                 (log branch, d = p)

solves div(|grad psi|^(p-2) grad psi) = 0 away from its center, for any
amplitude a and offset b.  Fitting such a profile through two radii gives
the comparison functions used to sandwich the normal derivative on the
neck arcs of two near-touching conductors: the potential gap T2 - T1
divided by the barrier-circle separation bounds n.grad(u) up to a factor
1 + O(delta) and an additive constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

from .geometry import (
    BarrierValidityError,
    ParticlePair,
    lower_barrier_radii,
    upper_barrier_radii,
)

__all__ = [
    "RadialProfile",
    "FluxBound",
    "radial_eval",
    "fit_two_point",
    "radial_gradient",
    "plaplace_residual",
    "barrier_flux_bound",
    "beta_exponent",
]

Branch = Literal["power", "log"]


class RadialDomainError(ValueError):
    """Raised for nonpositive radii or degenerate fit intervals."""


def beta_exponent(p: float, d: int) -> float:
    """Power-branch exponent (p - d)/(p - 1)."""
    return (p - d) / (p - 1.0)


@dataclass(frozen=True)
class RadialProfile:
    """Parameters of a radial p-harmonic solution centered at `center`.

    The branch is `log` exactly when d == p, otherwise `power` with
    exponent beta = (p - d)/(p - 1).
    """

    a: float
    b: float
    p: float
    d: int
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.p < 2.0:
            raise RadialDomainError(f"exponent p={self.p} must be >= 2")
        if self.d not in (2, 3):
            raise RadialDomainError(f"dimension d={self.d} must be 2 or 3")

    @property
    def branch(self) -> Branch:
        return "log" if self.d == self.p else "power"

    @property
    def beta(self) -> float:
        return beta_exponent(self.p, self.d)


def radial_eval(profile: RadialProfile, r: float) -> float:
    """Evaluate the profile at radius r > 0."""
    if r <= 0.0:
        raise RadialDomainError(f"radius must be positive, got {r}")
    if profile.branch == "log":
        return profile.a * math.log(r) + profile.b
    return profile.a * r**profile.beta + profile.b


def radial_gradient(profile: RadialProfile, r: float) -> float:
    """Radial derivative d(psi)/dr at radius r > 0 (increasing-r sign)."""
    if r <= 0.0:
        raise RadialDomainError(f"radius must be positive, got {r}")
    if profile.branch == "log":
        return profile.a / r
    beta = profile.beta
    return profile.a * beta * r ** (beta - 1.0)


def fit_two_point(
    r1: float, v1: float, r2: float, v2: float, p: float, d: int
) -> RadialProfile:
    """Radial profile taking the values v1 at r1 and v2 at r2.

    In the power branch a = (v2 - v1)/(r2^beta - r1^beta); the log branch
    replaces r^beta by log r.
    """
    if r1 <= 0.0 or r2 <= 0.0:
        raise RadialDomainError(f"radii must be positive, got ({r1}, {r2})")
    if r1 == r2:
        raise RadialDomainError(f"degenerate fit interval r1 == r2 == {r1}")
    if d == p:
        f1, f2 = math.log(r1), math.log(r2)
    else:
        beta = beta_exponent(p, d)
        f1, f2 = r1**beta, r2**beta
    a = (v2 - v1) / (f2 - f1)
    b = v1 - a * f1
    return RadialProfile(a=a, b=b, p=p, d=d)


@lru_cache(maxsize=64)
def _symbolic_residual(p: float, d: int, branch: Branch):
    """Lambdified radial p-Laplacian of the closed-form profile.

    Builds psi(r) symbolically, differentiates, and assembles
    (|psi'|^(p-2) psi' r^(d-1))' / r^(d-1) without simplification, so the
    returned callable measures genuine cancellation rather than an
    algebraic identity.
    """
    import sympy as sp

    r = sp.Symbol("r", positive=True)
    amp = sp.Symbol("amp", real=True, nonzero=True)
    if branch == "log":
        psi = amp * sp.log(r)
    else:
        beta = (sp.Float(p) - d) / (sp.Float(p) - 1)
        psi = amp * r**beta
    dpsi = sp.diff(psi, r)
    flux = sp.Abs(dpsi) ** (sp.Float(p) - 2) * dpsi * r ** (d - 1)
    residual = sp.diff(flux, r) / r ** (d - 1)
    return sp.lambdify((r, amp), residual, modules="math")


def plaplace_residual(profile: RadialProfile, r: float) -> float:
    """Radial p-Laplacian of the profile at r, via symbolic differentiation.

    Zero (to rounding) for every admissible profile; serves as the
    exactness check of the closed forms.  A constant profile (a = 0) has
    zero gradient and the residual is defined to be 0.
    """
    if r <= 0.0:
        raise RadialDomainError(f"radius must be positive, got {r}")
    if profile.a == 0.0:
        return 0.0
    fn = _symbolic_residual(float(profile.p), int(profile.d), profile.branch)
    val = fn(r, profile.a)
    return float(val.real if isinstance(val, complex) else val)


@dataclass(frozen=True)
class FluxBound:
    """Sandwich for the normal derivative at a neck-arc point.

    `leading` is (T2 - T1)/(delta + x^2/R); `lower` and `upper` come from
    the barrier-circle separations with the first-order factor
    (1 +/- c*delta) and the additive slack C applied.  The normal here
    points from the gap into particle 2, which makes all three values
    nonnegative when T2 >= T1.
    """

    lower: float
    upper: float
    leading: float
    slack: float
    gap_upper_barrier: float
    gap_lower_barrier: float
    lower_barrier_valid: bool

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def barrier_flux_bound(
    x: float,
    T1: float,
    T2: float,
    pair: ParticlePair,
    p: float,
    d: int,
    C_slack: float,
    c_delta: float = 2.0,
) -> FluxBound:
    """Two-sided bound for n.grad(u) at the neck-arc point above x.

    The upper bound divides the potential gap by the upper-barrier
    separation (inner radius r1 = delta), the lower bound by the exact
    lower-barrier separation (rho1 = delta); both are then widened by the
    configurable first-order factor (1 +/- c_delta*delta) and the additive
    slack C_slack.  Outside the lower construction's validity window the
    quadratic gap inflated by (1 + c_delta*delta) is used instead.
    """
    if T2 < T1:
        raise ValueError(
            f"need T2 >= T1 (swap particle labels otherwise), got T1={T1}, T2={T2}"
        )
    if pair.delta <= 0.0:
        raise ValueError("barrier bounds require a positive surface gap")
    delta, R = pair.delta, pair.R
    gap_quad = delta + x * x / R
    dT = T2 - T1
    leading = dT / gap_quad

    _, r2 = upper_barrier_radii(x, delta, pair)
    gap_u = r2 - delta
    try:
        _, rho2 = lower_barrier_radii(x, delta, pair)
        gap_l = rho2 - delta
        valid = True
    except BarrierValidityError:
        gap_l = gap_quad * (1.0 + c_delta * delta)
        valid = False

    one = 1.0 + c_delta * delta
    upper = dT / gap_u * one + C_slack
    lower = dT / gap_l / one - C_slack
    return FluxBound(
        lower=lower,
        upper=upper,
        leading=leading,
        slack=C_slack,
        gap_upper_barrier=gap_u,
        gap_lower_barrier=gap_l,
        lower_barrier_valid=valid,
    )
