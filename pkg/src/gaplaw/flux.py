"""Boundary flux integrals and the linear-case blow-up functional.

Flux of a discrete solution through a boundary curve means

    integral over the curve of |grad u|^(p-2) n . grad u ds.

Normal conventions (often left implicit, so they are fixed here once):

* outer boundary: n points out of the computational domain;
* particle boundaries: n points out of the particle, into the conducting
  medium.

With the canonical datum U = y and particle 2 on top, these conventions
make the tied-problem net flux through particle 2 (the quantity driving
the blow-up laws) positive.  Conservation then reads

    flux(outer) = flux(particle 1) + flux(particle 2).

Two quadratures are provided.  The `variational` route sums the
unconstrained energy-gradient residuals over the curve's nodes, which is
the flux the discrete optimality conditions control: per-particle fluxes
of floating solves and the combined flux of tied solves vanish to solver
tolerance by construction, and global conservation holds to the same
tolerance.  The `line` route integrates one-sided element gradients with
arc-length weights; it is the pointwise-density view used for sub-arcs
and for sampling the neck flux against the barrier bounds, and its
deviation from the variational value is reported as a quadrature
diagnostic, never hidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import NeckSpec
from .mesh import TAG_OUTER, TAG_P1, TAG_P2, Mesh
from .solver import (
    DiscreteSolution,
    _grad_full,
    element_gradients,
    recovered_node_gradients,
)

__all__ = [
    "FluxReport",
    "R0Estimate",
    "FluxError",
    "ExtrapolationUnreliableError",
    "boundary_flux",
    "flux_report",
    "r_delta",
    "estimate_r0",
    "q_functional",
    "QReport",
    "sample_neck_flux",
]

_CURVE_TAGS = {"outer": TAG_OUTER, "particle1": TAG_P1, "particle2": TAG_P2}


class FluxError(ValueError):
    pass


class ExtrapolationUnreliableError(RuntimeError):
    """Raised when the R_delta ladder is too noisy to extrapolate."""

    def __init__(self, message: str, ladder):
        super().__init__(message)
        self.ladder = ladder


def _node_flux_weights(solution: DiscreteSolution) -> np.ndarray:
    """Per-node flux in the raw all-outward convention (out of the domain
    everywhere, i.e. into the particles on particle curves)."""
    return _grad_full(solution.mesh, solution.u, solution.p, solution.eps) / solution.p


def _curve_sign(curve: str) -> float:
    # particle normals flip from domain-outward to particle-outward
    return 1.0 if curve == "outer" else -1.0


def _curve_nodes(mesh: Mesh, curve: str, neck: NeckSpec | None = None) -> np.ndarray:
    if curve in _CURVE_TAGS:
        idx = mesh.nodes_with_tag(_CURVE_TAGS[curve])
        if len(idx) == 0:
            raise FluxError(f"mesh has no nodes on curve {curve!r}")
        return idx
    if curve in ("s2", "particle2_away"):
        if neck is None:
            raise FluxError(f"curve {curve!r} needs a neck window")
        idx = mesh.nodes_with_tag(TAG_P2)
        cy = neck.pair.center2[1]
        # gap side of the particle only: |x| <= w excludes the far side
        inside = (np.abs(mesh.nodes[idx, 0]) <= neck.w) & (mesh.nodes[idx, 1] < cy)
        return idx[inside] if curve == "s2" else idx[~inside]
    raise FluxError(f"unknown curve {curve!r}")


def _curve_edges(mesh: Mesh, curve: str, neck: NeckSpec | None = None):
    base = "outer" if curve == "outer" else (
        "particle1" if curve == "particle1" else "particle2"
    )
    if curve in ("s2", "particle2_away") and neck is None:
        raise FluxError(f"curve {curve!r} needs a neck window")
    edges, owners = mesh.boundary_edges[_CURVE_TAGS[base]]
    if curve in ("s2", "particle2_away"):
        mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
        cy = neck.pair.center2[1]
        inside = (np.abs(mids[:, 0]) <= neck.w) & (mids[:, 1] < cy)
        sel = inside if curve == "s2" else ~inside
        return edges[sel], owners[sel]
    return edges, owners


def _line_flux(solution: DiscreteSolution, curve: str, neck=None) -> float:
    """Arc-length quadrature of |grad u|^(p-2) n.grad u with one-sided
    element gradients, in the raw all-outward convention."""
    mesh = solution.mesh
    edges, owners = _curve_edges(mesh, curve, neck)
    if len(edges) == 0:
        return 0.0
    g = element_gradients(mesh, solution.u)[owners]
    a = mesh.nodes[edges[:, 0]]
    b = mesh.nodes[edges[:, 1]]
    tang = b - a
    lengths = np.hypot(tang[:, 0], tang[:, 1])
    normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]
    # orient away from the owning element's centroid
    mid = 0.5 * (a + b)
    toward = mesh.centroids[owners] - mid
    flip = np.einsum("ei,ei->e", normals, toward) > 0
    normals[flip] *= -1.0
    gn = np.einsum("ei,ei->e", g, normals)
    mag = np.hypot(g[:, 0], g[:, 1])
    dens = mag ** (solution.p - 2.0) * gn
    return float(np.sum(dens * lengths))


def boundary_flux(
    solution: DiscreteSolution,
    curve: str,
    neck: NeckSpec | None = None,
    method: str = "variational",
) -> float:
    """Flux through a tagged curve or neck sub-arc.

    curve: 'outer' | 'particle1' | 'particle2' | 's2' | 'particle2_away'.
    Normals follow the module convention (outer: out of the domain,
    particles: out of the particle).
    """
    if method == "variational":
        w = _node_flux_weights(solution)
        idx = _curve_nodes(solution.mesh, curve, neck)
        return _curve_sign(curve) * float(np.sum(w[idx]))
    if method == "line":
        return _curve_sign(curve) * _line_flux(solution, curve, neck)
    raise FluxError(f"unknown quadrature method {method!r}")


@dataclass(frozen=True)
class FluxReport:
    """All boundary fluxes of one solve plus their balance defects.

    Defects are relative to `scale`, the largest flux piece magnitude
    (the neck sub-arc typically dominates); `quadrature_defect` is the
    worst relative disagreement between the variational and line
    quadratures over the full curves.
    """

    kind: str
    flux_outer: float
    flux_p1: float
    flux_p2: float
    flux_s2: float | None
    flux_p2_away: float | None
    scale: float
    balance_defect: float
    particle_defects: tuple[float, ...]
    combined_defect: float
    quadrature_defect: float

    @property
    def balance_defect_rel(self) -> float:
        return self.balance_defect / self.scale if self.scale > 0 else 0.0

    @property
    def particle_defects_rel(self) -> tuple[float, ...]:
        if self.scale <= 0:
            return tuple(0.0 for _ in self.particle_defects)
        return tuple(d / self.scale for d in self.particle_defects)

    @property
    def combined_defect_rel(self) -> float:
        return self.combined_defect / self.scale if self.scale > 0 else 0.0

    @property
    def r_delta(self) -> float | None:
        """The tied-problem flux constant; None for other problem kinds."""
        return self.flux_p2 if self.kind == "tied" else None

    def csv_rows(self, delta: float) -> list[str]:
        """One `delta,kind,curve,flux` row per reported curve."""
        rows = []
        for curve, val in (
            ("outer", self.flux_outer),
            ("particle1", self.flux_p1),
            ("particle2", self.flux_p2),
            ("neck_arc", self.flux_s2),
            ("particle2_away", self.flux_p2_away),
        ):
            if val is not None:
                rows.append(f"{delta!r},{self.kind},{curve},{float(val)!r}")
        return rows


def flux_report(solution: DiscreteSolution, neck: NeckSpec | None = None) -> FluxReport:
    """Assemble the per-curve flux table for one converged solve."""
    mesh = solution.mesh
    have_p2 = len(mesh.nodes_with_tag(TAG_P2)) > 0
    f_out = boundary_flux(solution, "outer")
    f_p1 = boundary_flux(solution, "particle1")
    f_p2 = boundary_flux(solution, "particle2") if have_p2 else 0.0
    f_s2 = f_away = None
    if neck is not None and have_p2:
        f_s2 = boundary_flux(solution, "s2", neck)
        f_away = boundary_flux(solution, "particle2_away", neck)
    pieces = [f_out, f_p1, f_p2] + [v for v in (f_s2, f_away) if v is not None]
    scale = max(abs(v) for v in pieces)
    qdef = 0.0
    for curve, v in (("outer", f_out), ("particle1", f_p1), ("particle2", f_p2)):
        if curve == "particle2" and not have_p2:
            continue
        lv = boundary_flux(solution, curve, method="line")
        qdef = max(qdef, abs(lv - v))
    return FluxReport(
        kind=solution.kind,
        flux_outer=f_out,
        flux_p1=f_p1,
        flux_p2=f_p2,
        flux_s2=f_s2,
        flux_p2_away=f_away,
        scale=scale,
        balance_defect=abs(f_out - f_p1 - f_p2),
        particle_defects=(abs(f_p1), abs(f_p2)),
        combined_defect=abs(f_p1 + f_p2),
        quadrature_defect=qdef / scale if scale > 0 else 0.0,
    )


def r_delta(solution: DiscreteSolution, neck: NeckSpec | None = None,
            split: str = "full") -> float:
    """Net flux through particle 2 of a tied solve (particle-outward).

    split='full' integrates over the whole particle boundary,
    split='away-from-neck' over the part outside the neck window; the two
    differ by the neck-arc contribution, which is O(w) for the tied
    solution.
    """
    if solution.kind != "tied":
        raise FluxError(f"r_delta is defined for tied solves, got {solution.kind!r}")
    if split == "full":
        return boundary_flux(solution, "particle2")
    if split == "away-from-neck":
        return boundary_flux(solution, "particle2_away", neck)
    raise FluxError(f"unknown split {split!r}")


@dataclass(frozen=True)
class R0Estimate:
    """Tied-ladder extrapolation of the limiting flux constant.

    `ladder` holds (delta, R_delta) pairs in decreasing delta order; the
    extrapolation fits R_delta = R0 + slope*delta by least squares and
    `residual` is the fit deviation at the smallest delta.  The fit
    residuals are part of the public result, never hidden.
    """

    ladder: tuple[tuple[float, float], ...]
    R0: float
    slope: float
    residual: float
    max_fit_residual: float


def _fit_r0(pairs, noise_tol: float, abs_floor: float = 1e-9) -> R0Estimate:
    if len(pairs) < 3:
        raise ValueError("R0 extrapolation needs at least 3 ladder points")
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    resid = np.abs(fit - y)
    span = max(float(np.max(y) - np.min(y)), abs(coef[0]) * 1e-12, 1e-300)
    misfit = float(np.max(resid))
    # fluxes below solver resolution are numerical zeros, not noise
    if misfit > noise_tol * max(span, abs(coef[0])) and misfit > abs_floor:
        raise ExtrapolationUnreliableError(
            f"R_delta ladder misfits linear extrapolation by {misfit:.3e}",
            list(pairs),
        )
    return R0Estimate(
        ladder=tuple(pairs),
        R0=float(coef[0]),
        slope=float(coef[1]),
        residual=float(resid[-1]),
        max_fit_residual=float(np.max(resid)),
    )


def estimate_r0(tied_solver, deltas, noise_tol: float = 0.25) -> R0Estimate:
    """Extrapolate R_delta -> R0 over a decreasing delta ladder.

    tied_solver maps delta to a converged tied DiscreteSolution.  Raises
    ExtrapolationUnreliableError (carrying the raw ladder) when the
    linear-in-delta fit misfits by more than noise_tol of the data range.
    """
    deltas = [float(d) for d in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta ladder must be strictly decreasing")
    pairs = []
    for d in deltas:
        sol = tied_solver(d)
        pairs.append((d, r_delta(sol)))
    return _fit_r0(pairs, noise_tol)


@dataclass(frozen=True)
class QReport:
    """The linear-case blow-up functional and its algebraic identity.

    a[i][j] are the particle-boundary fluxes of the three harmonic
    auxiliaries (particle-outward normals), b[j] the outer-boundary
    fluxes (domain-outward).  The identity

        Q = -(b1 + b2) * R_delta

    is checked with R_delta computed from the tied combination
    T*(v1 + v2) + v3 on the same mesh; `identity_defect` is the absolute
    difference of the two sides.
    """

    Q: float
    a: tuple[tuple[float, float, float], tuple[float, float, float]]
    b: tuple[float, float]
    T_tied: float
    R_delta: float
    identity_defect: float
    reciprocity_defect: float

    @property
    def minus_b_sum(self) -> float:
        return -(self.b[0] + self.b[1])


def q_functional(v1: DiscreteSolution, v2: DiscreteSolution,
                 v3: DiscreteSolution) -> QReport:
    """Blow-up functional of the three linear auxiliaries.

    Q = flux_1(v3) * b_2 - flux_2(v3) * b_1, with flux_i over particle i
    and b_j over the outer boundary.  All three solutions must live on
    the same mesh; the tied linear solution is reconstructed by
    superposition, which is exact for the discrete problems.
    """
    mesh = v1.mesh
    if v2.mesh is not mesh or v3.mesh is not mesh:
        raise FluxError("q_functional needs all three auxiliaries on one mesh")
    sols = (v1, v2, v3)
    p1 = mesh.nodes_with_tag(TAG_P1)
    p2 = mesh.nodes_with_tag(TAG_P2)
    out = mesh.nodes_with_tag(TAG_OUTER)
    a = np.empty((2, 3))
    b = np.empty(3)
    for j, sol in enumerate(sols):
        w = _node_flux_weights(sol)
        a[0, j] = -float(np.sum(w[p1]))  # particle-outward
        a[1, j] = -float(np.sum(w[p2]))
        b[j] = float(np.sum(w[out]))
    Q = a[0, 2] * b[1] - a[1, 2] * b[0]
    denom = a[0, 0] + a[0, 1] + a[1, 0] + a[1, 1]
    T = -(a[0, 2] + a[1, 2]) / denom
    Rd = T * (a[1, 0] + a[1, 1]) + a[1, 2]
    identity = abs(Q + (b[0] + b[1]) * Rd)
    return QReport(
        Q=float(Q),
        a=((a[0, 0], a[0, 1], a[0, 2]), (a[1, 0], a[1, 1], a[1, 2])),
        b=(float(b[0]), float(b[1])),
        T_tied=float(T),
        R_delta=float(Rd),
        identity_defect=float(identity),
        reciprocity_defect=abs(a[0, 1] - a[1, 0]),
    )


def sample_neck_flux(solution: DiscreteSolution, neck: NeckSpec):
    """Pointwise normal derivative n.grad u at the neck-arc edge midpoints
    of particle 2, with n pointing from the gap into the particle (the
    orientation that makes the values positive when T2 > T1).

    Returns (x_mid, measured, slack): `measured` uses the one-sided
    element gradient, `slack` is its deviation from the patch-recovered
    gradient, an observed discretization error proxy per sample.
    """
    mesh = solution.mesh
    edges, owners = _curve_edges(mesh, "s2", neck)
    if len(edges) == 0:
        raise FluxError("no boundary edges inside the neck window")
    a = mesh.nodes[edges[:, 0]]
    b = mesh.nodes[edges[:, 1]]
    mid = 0.5 * (a + b)
    tang = b - a
    lengths = np.hypot(tang[:, 0], tang[:, 1])
    normals = np.column_stack([tang[:, 1], -tang[:, 0]]) / lengths[:, None]
    toward = mesh.centroids[owners] - mid
    flip = np.einsum("ei,ei->e", normals, toward) > 0
    normals[flip] *= -1.0  # out of the domain = into particle 2
    g_elem = element_gradients(mesh, solution.u)[owners]
    g_node = recovered_node_gradients(mesh, solution.u)
    g_rec = 0.5 * (g_node[edges[:, 0]] + g_node[edges[:, 1]])
    measured = np.einsum("ei,ei->e", g_elem, normals)
    recovered = np.einsum("ei,ei->e", g_rec, normals)
    order = np.argsort(mid[:, 0])
    return mid[order, 0], measured[order], np.abs(measured - recovered)[order]
