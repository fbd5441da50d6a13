"""Exact and leading-order geometry of two near-touching disks.

Everything lives in a local frame with the gap centered at the origin:
particle 2 is the disk of radius R centered at (0, +(R + delta/2)) and
particle 1 its mirror image below the x-axis, so the surfaces are a
distance delta apart at x = 0.  The vertical width of the gap at
horizontal offset x is

    exact:      2R + delta - 2*sqrt(R^2 - x^2)
    quadratic:  delta + x^2/R          (leading order, exact >= quadratic)

The barrier-radius helpers construct the pairs of concentric tangent
circles used to sandwich the normal derivative in the neck: an inner
circle of radius r1 tangent to particle 1 from inside, together with the
concentric circle of radius r2 tangent to particle 2 (upper barrier), and
the analogous exact construction from inside particle 2 (lower barrier).
All functions are pure and scale-covariant: scaling every input length by
a factor lam scales every returned length by lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

__all__ = [
    "ParticlePair",
    "NeckSpec",
    "DomainSpec",
    "AnnulusSpec",
    "gap_width",
    "upper_barrier_radii",
    "lower_barrier_radii",
    "neck_region",
]

GapMode = Literal["exact", "quadratic"]


class GeometryError(ValueError):
    """Raised when an argument violates a geometric precondition."""


class BarrierValidityError(GeometryError):
    """Raised when the lower-barrier square root turns negative.

    Callers fall back to the constant far-window bound in that regime.
    """


@dataclass(frozen=True)
class ParticlePair:
    """Two disks of common radius R with surface gap delta.

    Centers sit on the vertical axis at +/-(R + delta/2); the center
    separation is exactly 2R + delta.
    """

    R: float
    delta: float

    def __post_init__(self) -> None:
        if self.R <= 0.0:
            raise GeometryError(f"particle radius must be positive, got {self.R}")
        if self.delta < 0.0:
            raise GeometryError(f"surface gap must be nonnegative, got {self.delta}")

    @property
    def center1(self) -> tuple[float, float]:
        return (0.0, -(self.R + 0.5 * self.delta))

    @property
    def center2(self) -> tuple[float, float]:
        return (0.0, self.R + 0.5 * self.delta)

    @property
    def center_separation(self) -> float:
        return 2.0 * self.R + self.delta

    def lower_arc_y(self, x):
        """y of the particle-1 surface (top of the lower disk) at offset x."""
        r2 = self.R * self.R - np.asarray(x) ** 2
        return -(self.R + 0.5 * self.delta) + np.sqrt(r2)

    def upper_arc_y(self, x):
        """y of the particle-2 surface (bottom of the upper disk) at offset x."""
        r2 = self.R * self.R - np.asarray(x) ** 2
        return (self.R + 0.5 * self.delta) - np.sqrt(r2)


def gap_width(x: float, pair: ParticlePair, mode: GapMode = "exact") -> float:
    """Vertical distance between the two particle surfaces at offset x.

    exact mode evaluates the circle geometry, quadratic mode the
    leading-order parabola delta + x^2/R.  For all admissible x,
    exact >= quadratic >= delta.
    """
    if abs(x) >= pair.R:
        raise GeometryError(f"|x|={abs(x)} must be < R={pair.R}")
    if mode == "exact":
        return 2.0 * pair.R + pair.delta - 2.0 * math.sqrt(pair.R**2 - x * x)
    if mode == "quadratic":
        return pair.delta + x * x / pair.R
    raise GeometryError(f"unknown gap mode {mode!r}")


def upper_barrier_radii(x: float, r1: float, pair: ParticlePair) -> tuple[float, float]:
    """Radii (r1, r2) of the upper-barrier circle pair at contact offset x.

    The inner circle of radius r1 touches particle 1 from inside at the
    surface point above x; r2 is the radius of the concentric circle
    tangent to particle 2, to quadratic order in x:

        r2 = delta + r1 + (1/2) (1 - r1/R) (2 - r1/R) x^2 / R

    At x = 0 the separation r2 - r1 collapses to delta.
    """
    if not 0.0 < r1 < pair.R:
        raise GeometryError(f"inner radius r1={r1} must lie in (0, R={pair.R})")
    if abs(x) >= pair.R:
        raise GeometryError(f"|x|={abs(x)} must be < R={pair.R}")
    R, delta = pair.R, pair.delta
    r2 = delta + r1 + 0.5 * (1.0 - r1 / R) * (2.0 - r1 / R) * x * x / R
    return r1, r2


def lower_barrier_radii(x: float, rho1: float, pair: ParticlePair) -> tuple[float, float]:
    """Radii (rho1, rho2) of the lower-barrier circle pair at offset x.

    The inner circle of radius rho1 touches particle 2 from inside, with
    its center on the ray from the center of particle 1 through the
    surface point above x; rho2 is the exact distance from that center to
    the surface point:

        rho2 = -R + (2R + delta) [ sqrt(1 - x^2/R^2)
                                   - sqrt(((R - rho1)/(2R + delta))^2 - x^2/R^2) ]

    At x = 0 this collapses to rho2 = delta + rho1.  The construction is
    only valid while the second radicand is nonnegative, i.e. for
    |x| <= R (R - rho1) / (2R + delta); beyond that a
    BarrierValidityError is raised.
    """
    if not 0.0 < rho1 < pair.R:
        raise GeometryError(f"inner radius rho1={rho1} must lie in (0, R={pair.R})")
    R, delta = pair.R, pair.delta
    s = 2.0 * R + delta
    u = x * x / (R * R)
    rad1 = 1.0 - u
    rad2 = ((R - rho1) / s) ** 2 - u
    if rad1 < 0.0 or rad2 < 0.0:
        raise BarrierValidityError(
            f"lower barrier undefined at |x|={abs(x)}; valid window is "
            f"|x| <= {R * (R - rho1) / s}"
        )
    rho2 = -R + s * (math.sqrt(rad1) - math.sqrt(rad2))
    return rho1, rho2


@dataclass(frozen=True)
class NeckSpec:
    """The neck region between the particles within the window |x| <= w.

    Boundary decomposition: arc_1 and arc_2 are the particle-surface
    pieces with |x| <= w (on particles 1 and 2 respectively), and the two
    lateral walls are the vertical segments at x = +/-w connecting them.
    """

    pair: ParticlePair
    w: float

    def __post_init__(self) -> None:
        if not 0.0 < self.w < self.pair.R:
            raise GeometryError(f"neck width w={self.w} must lie in (0, R={self.pair.R})")

    def contains(self, x: float, y: float) -> bool:
        """Membership test for the open neck region."""
        if abs(x) >= self.w:
            return False
        return bool(self.pair.lower_arc_y(x) < y < self.pair.upper_arc_y(x))

    def arc_halfangle(self) -> float:
        """Half-angle subtended by each neck arc at its particle center."""
        return math.asin(self.w / self.pair.R)

    def arc_length(self) -> float:
        """Arc length of each of arc_1, arc_2: 2 R asin(w/R)."""
        return 2.0 * self.pair.R * self.arc_halfangle()

    def lateral_wall(self, side: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """Endpoints of the lateral wall at x = side*w, side in {-1, +1}."""
        if side not in (-1, 1):
            raise GeometryError("side must be -1 or +1")
        x = side * self.w
        return (x, float(self.pair.lower_arc_y(x))), (x, float(self.pair.upper_arc_y(x)))

    def on_arc(self, x, y, which: int, tol: float = 1e-12) -> bool:
        """Whether the point lies on neck arc `which` (1 or 2) within tol*R."""
        cx, cy = self.pair.center1 if which == 1 else self.pair.center2
        r = math.hypot(x - cx, y - cy)
        gap_side = y > cy if which == 1 else y < cy
        return abs(x) <= self.w and gap_side and abs(r - self.pair.R) <= tol * self.pair.R


def neck_region(pair: ParticlePair, w: float) -> NeckSpec:
    """Build the neck window of half-width w between the two particles."""
    return NeckSpec(pair=pair, w=w)


def _linear_y(x: float, y: float) -> float:
    return y


@dataclass(frozen=True)
class DomainSpec:
    """Two-particle conductor geometry inside a disk of radius R_out.

    The outer boundary is the circle of radius R_out centered at the
    origin; `boundary_datum` is the applied potential on it.  `clearance`
    is the required minimum distance between the outer boundary and the
    particles.
    """

    pair: ParticlePair
    R_out: float
    boundary_datum: Callable[[float, float], float] = _linear_y
    clearance: float = 0.0
    datum_name: str = "linear-y"

    def __post_init__(self) -> None:
        margin = self.R_out - (2.0 * self.pair.R + 0.5 * self.pair.delta)
        if margin <= 0.0:
            raise GeometryError(
                f"particles of extent {2 * self.pair.R + 0.5 * self.pair.delta} do not "
                f"fit inside the outer disk of radius {self.R_out}"
            )
        if margin < self.clearance:
            raise GeometryError(
                f"outer-boundary clearance {margin:.6g} below required {self.clearance:.6g}"
            )

    @property
    def boundary_margin(self) -> float:
        """Actual distance from the particles to the outer boundary."""
        return self.R_out - (2.0 * self.pair.R + 0.5 * self.pair.delta)

    def datum_values(self, xy) -> np.ndarray:
        pts = np.asarray(xy, dtype=float)
        return np.array([self.boundary_datum(float(p[0]), float(p[1])) for p in pts])


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus r_inner < r < r_outer used for exact-solution solver tests.

    The inner circle plays the role of a single prescribed-potential
    inclusion, the outer circle carries the applied datum.
    """

    r_inner: float
    r_outer: float

    def __post_init__(self) -> None:
        if not 0.0 < self.r_inner < self.r_outer:
            raise GeometryError(
                f"need 0 < r_inner < r_outer, got ({self.r_inner}, {self.r_outer})"
            )
