"""Body-fitted graded triangulations for the two-disk and annulus domains.

The two-disk mesh is assembled from three conforming pieces:

1. a structured strip through the neck: vertical node columns between the
   two particle arcs for |x| <= strip half-width, with a fixed (even)
   number of layers across the local gap, so cell size tracks the gap
   width delta + x^2/R and the strip is exactly symmetric under y -> -y;
2. a relaxed unstructured triangulation of the upper outer region
   (force-equilibrium smoothing of a rejection-sampled hex seed against a
   Lipschitz-graded sizing field, with every boundary and interface node
   held fixed);
3. the mirror image of (2) below the x-axis.

Mirroring makes the whole mesh symmetric under y -> -y as a set of nodes
and elements, which the odd-symmetry solver tests rely on.  Construction
is deterministic for fixed inputs (a seeded generator drives only the
initial rejection sampling).

Annulus meshes for the exact-solution tests are plain structured polar
grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from .geometry import AnnulusSpec, DomainSpec

__all__ = [
    "TAG_INTERIOR",
    "TAG_OUTER",
    "TAG_P1",
    "TAG_P2",
    "MeshParams",
    "Mesh",
    "MeshError",
    "build_mesh",
    "build_annulus_mesh",
    "save_mesh_text",
    "load_mesh_text",
]

TAG_INTERIOR = 0
TAG_OUTER = 1
TAG_P1 = 2
TAG_P2 = 3

_TAG_NAMES = {TAG_INTERIOR: "interior", TAG_OUTER: "outer", TAG_P1: "particle1", TAG_P2: "particle2"}


class MeshError(RuntimeError):
    """Raised for infeasible meshing requests or failed quality gates."""


@dataclass(frozen=True)
class MeshParams:
    """Grading and quality knobs for the two-disk mesh.

    `neck_layers` is the number of element layers across the gap at
    x = 0 (even, >= 4, so the neck target size h_neck = delta/neck_layers
    stays <= delta/4).  `strip_aspect` is the width/height ratio of the
    structured strip cells; `grading` the Lipschitz constant of the
    sizing field outside the strip.
    """

    h_far: float = 0.3
    neck_layers: int = 4
    strip_halfwidth: float | None = None  # default R/2
    strip_aspect: float = 1.4
    grading: float = 0.3
    relax_iters: int = 160
    seed: int = 0
    quality_floor: float = 0.02

    def __post_init__(self):
        if self.neck_layers < 4 or self.neck_layers % 2 != 0:
            raise MeshError(f"neck_layers must be even and >= 4, got {self.neck_layers}")
        if self.h_far <= 0:
            raise MeshError("h_far must be positive")


@dataclass
class Mesh:
    """Conforming triangle mesh with tagged boundary nodes.

    nodes: (n, 2) float; triangles: (m, 3) int (counterclockwise);
    node_tags: (n,) int with the TAG_* constants.  Geometry arrays
    (areas, P1 gradient operators, boundary edges) are computed once at
    construction.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    node_tags: np.ndarray
    h_neck: float
    h_far: float
    domain: object = None

    areas: np.ndarray = field(init=False, repr=False)
    grads: np.ndarray = field(init=False, repr=False)
    centroids: np.ndarray = field(init=False, repr=False)
    boundary_edges: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.node_tags = np.ascontiguousarray(self.node_tags, dtype=np.int8)
        self._orient_ccw()
        self._build_geometry()
        self._build_boundary_edges()

    # -- construction helpers -------------------------------------------------

    def _orient_ccw(self):
        p = self.nodes[self.triangles]
        det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
            p[:, 2, 0] - p[:, 0, 0]
        ) * (p[:, 1, 1] - p[:, 0, 1])
        flip = det < 0
        if np.any(flip):
            self.triangles[flip] = self.triangles[flip][:, [0, 2, 1]]

    def _build_geometry(self):
        p = self.nodes[self.triangles]
        x, y = p[..., 0], p[..., 1]
        det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (
            y[:, 1] - y[:, 0]
        )
        if np.any(det <= 0):
            raise MeshError("degenerate or inverted triangle in mesh")
        self.areas = 0.5 * det
        # P1 basis gradients: grads[e, :, k] = grad of hat function at local node k
        gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        self.grads = np.stack([gx, gy], axis=1) / det[:, None, None]
        self.centroids = p.mean(axis=1)

    def _build_boundary_edges(self):
        tris = self.triangles
        edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        owner = np.tile(np.arange(len(tris)), 3)
        key = np.sort(edges, axis=1)
        _, idx, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
        bidx = idx[counts == 1]
        bedges = edges[bidx]
        bowner = owner[bidx]
        out = {}
        t1 = self.node_tags[bedges[:, 0]]
        t2 = self.node_tags[bedges[:, 1]]
        if np.any(t1 == TAG_INTERIOR) or np.any(t2 == TAG_INTERIOR):
            raise MeshError("boundary edge with an untagged endpoint")
        if np.any(t1 != t2):
            raise MeshError("boundary edge straddling two boundary curves")
        for tag in (TAG_OUTER, TAG_P1, TAG_P2):
            sel = t1 == tag
            out[tag] = (bedges[sel], bowner[sel])
        self.boundary_edges = out

    # -- queries --------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def nodes_with_tag(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.node_tags == tag)

    def quality(self) -> np.ndarray:
        """Per-element inradius/circumradius ratio (equilateral = 1/2)."""
        p = self.nodes[self.triangles]
        a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        s = 0.5 * (a + b + c)
        inr = self.areas / s
        circ = a * b * c / (4.0 * self.areas)
        return inr / circ

    def boundary_node_residuals(self) -> float:
        """Max distance of tagged nodes from their curves, scaled by R."""
        dom = self.domain
        worst = 0.0
        if isinstance(dom, DomainSpec):
            R = dom.pair.R
            for tag, (cx, cy, rr) in {
                TAG_OUTER: (0.0, 0.0, dom.R_out),
                TAG_P1: (*dom.pair.center1, R),
                TAG_P2: (*dom.pair.center2, R),
            }.items():
                idx = self.nodes_with_tag(tag)
                if len(idx) == 0:
                    continue
                d = np.hypot(self.nodes[idx, 0] - cx, self.nodes[idx, 1] - cy)
                worst = max(worst, float(np.max(np.abs(d - rr))) / R)
        elif isinstance(dom, AnnulusSpec):
            for tag, rr in {TAG_P1: dom.r_inner, TAG_OUTER: dom.r_outer}.items():
                idx = self.nodes_with_tag(tag)
                d = np.hypot(self.nodes[idx, 0], self.nodes[idx, 1])
                worst = max(worst, float(np.max(np.abs(d - rr))) / dom.r_outer)
        return worst


# -----------------------------------------------------------------------------
# marching helpers
# -----------------------------------------------------------------------------


def _march_interval(a: float, b: float, step) -> np.ndarray:
    """Points from a to b (inclusive) with local spacing step(t), rescaled
    so the endpoints land exactly."""
    ts = [a]
    guard = 0
    while ts[-1] < b:
        dt = step(ts[-1])
        if dt <= 0:
            raise MeshError("nonpositive marching step")
        ts.append(ts[-1] + dt)
        guard += 1
        if guard > 2_000_000:
            raise MeshError("marching failed to terminate")
    ts = np.asarray(ts)
    if len(ts) < 2:
        return np.array([a, b])
    ts = a + (ts - a) * ((b - a) / (ts[-1] - a))
    ts[0], ts[-1] = a, b
    return ts


# -----------------------------------------------------------------------------
# structured neck strip
# -----------------------------------------------------------------------------


def _strip_columns(domain: DomainSpec, params: MeshParams) -> np.ndarray:
    pair = domain.pair
    R, delta = pair.R, pair.delta
    xs_half = params.strip_halfwidth if params.strip_halfwidth is not None else 0.5 * R
    if not 0 < xs_half < R:
        raise MeshError(f"strip half-width {xs_half} must lie in (0, R)")
    N = params.neck_layers

    def gap(x):
        return 2.0 * R + delta - 2.0 * math.sqrt(R * R - x * x)

    def step(x):
        return params.strip_aspect * gap(x) / N

    xs_pos = _march_interval(0.0, xs_half, step)
    return np.concatenate([-xs_pos[:0:-1], xs_pos])


def _build_strip(domain: DomainSpec, params: MeshParams):
    """Structured strip nodes, triangles, and tags.

    Node (i, j) sits at column x_i, height fraction j/N across the local
    gap; j coordinates are built antisymmetric in exact float arithmetic
    so the strip mirrors onto itself under y -> -y.
    """
    pair = domain.pair
    N = params.neck_layers
    xs = _strip_columns(domain, params)
    M = len(xs)
    R, delta = pair.R, pair.delta

    nodes = np.empty((M * (N + 1), 2))
    tags = np.zeros(M * (N + 1), dtype=np.int8)
    for i, x in enumerate(xs):
        g = 2.0 * R + delta - 2.0 * math.sqrt(R * R - x * x)
        for j in range(N + 1):
            # y = g*(2j - N)/(2N): exactly antisymmetric under j -> N - j
            y = g * (2 * j - N) / (2 * N)
            k = i * (N + 1) + j
            nodes[k] = (x, y)
            if j == 0:
                tags[k] = TAG_P1
            elif j == N:
                tags[k] = TAG_P2

    def nid(i, j):
        return i * (N + 1) + j

    tris = []
    for i in range(M - 1):
        for j in range(N // 2, N):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            if (i + j) % 2 == 0:
                upper = [(a, b, c), (a, c, d)]
            else:
                upper = [(a, b, d), (b, c, d)]
            tris.extend(upper)
            # mirror image of this quad (rows N-1-j), vertex order flipped
            am, bm = nid(i, N - j), nid(i + 1, N - j)
            cm, dm = nid(i + 1, N - j - 1), nid(i, N - j - 1)
            if (i + j) % 2 == 0:
                tris.extend([(a_, c_, b_) for (a_, b_, c_) in [(am, bm, cm), (am, cm, dm)]])
            else:
                tris.extend([(a_, c_, b_) for (a_, b_, c_) in [(am, bm, dm), (bm, cm, dm)]])
    return nodes, np.asarray(tris, dtype=np.int64), tags, xs


# -----------------------------------------------------------------------------
# relaxed outer region (upper half)
# -----------------------------------------------------------------------------


class _UpperRegion:
    """Inside test, approximate signed distance, and sizing field for the
    upper outer region (outer disk minus particle 2 minus strip, y > 0)."""

    def __init__(self, domain: DomainSpec, params: MeshParams, xs_half: float, h_ifc: float):
        self.dom = domain
        self.R_out = domain.R_out
        self.R = domain.pair.R
        self.cy = domain.pair.R + 0.5 * domain.pair.delta
        self.delta = domain.pair.delta
        self.xs_half = xs_half
        self.y_box = float(domain.pair.upper_arc_y(xs_half))
        self.h_ifc = h_ifc
        self.h_far = params.h_far
        self.grading = params.grading

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        x, y = pts[:, 0], pts[:, 1]
        d_out = np.hypot(x, y) - self.R_out
        d_p2 = self.R - np.hypot(x, y - self.cy)
        xc = np.clip(np.abs(x), 0.0, self.R * (1.0 - 1e-12))
        y_up = self.cy - np.sqrt(self.R * self.R - xc * xc)
        d_strip = np.minimum(self.xs_half - np.abs(x), y_up - y)
        return np.maximum.reduce([d_out, d_p2, d_strip, -y])

    def sizing(self, pts: np.ndarray) -> np.ndarray:
        x, y = pts[:, 0], pts[:, 1]
        dx = np.maximum(np.abs(x) - self.xs_half, 0.0)
        dy = np.maximum(np.abs(y) - self.y_box, 0.0)
        dist = np.hypot(dx, dy)
        return np.minimum(self.h_far, self.h_ifc + self.grading * dist)


def _relax_points(region: _UpperRegion, fixed: np.ndarray, seed_pts: np.ndarray,
                  iters: int) -> np.ndarray:
    """Force-equilibrium smoothing of interior points against the sizing
    field; fixed points do not move, escaped points are projected back."""
    pts = np.vstack([fixed, seed_pts])
    nfix = len(fixed)
    Fscale, deltat = 1.2, 0.2
    geps = 1e-3 * region.h_ifc
    deps = 1e-7 * region.R_out
    last = None
    for _ in range(iters):
        if last is None or np.max(np.hypot(*((pts - last).T))) > 0.05 * region.h_ifc:
            tri = Delaunay(pts)
            cent = pts[tri.simplices].mean(axis=1)
            keep = region.signed_distance(cent) < -geps
            simp = tri.simplices[keep]
            bars = np.unique(
                np.sort(
                    np.concatenate([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [2, 0]]]),
                    axis=1,
                ),
                axis=0,
            )
            last = pts.copy()
        vec = pts[bars[:, 0]] - pts[bars[:, 1]]
        L = np.hypot(vec[:, 0], vec[:, 1])
        mid = 0.5 * (pts[bars[:, 0]] + pts[bars[:, 1]])
        hbar = region.sizing(mid)
        L0 = hbar * Fscale * math.sqrt(np.sum(L * L) / np.sum(hbar * hbar))
        F = np.maximum(L0 - L, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            fvec = (F / np.maximum(L, 1e-300))[:, None] * vec
        move = np.zeros_like(pts)
        np.add.at(move, bars[:, 0], fvec)
        np.add.at(move, bars[:, 1], -fvec)
        move[:nfix] = 0.0
        pts = pts + deltat * move
        # project escapees back inside
        d = region.signed_distance(pts[nfix:])
        out = np.flatnonzero(d > -geps) + nfix
        if len(out):
            po = pts[out]
            d0 = region.signed_distance(po)
            dgx = (region.signed_distance(po + [deps, 0.0]) - d0) / deps
            dgy = (region.signed_distance(po + [0.0, deps]) - d0) / deps
            norm2 = np.maximum(dgx * dgx + dgy * dgy, 1e-30)
            pts[out, 0] = po[:, 0] - (d0 + geps) * dgx / norm2
            pts[out, 1] = po[:, 1] - (d0 + geps) * dgy / norm2
    # drop stragglers that ended up hugging the boundary
    d = region.signed_distance(pts[nfix:])
    h = region.sizing(pts[nfix:])
    keep = d < -0.25 * h
    return pts[nfix:][keep]


def _hex_seed(region: _UpperRegion, rng: np.random.Generator) -> np.ndarray:
    h0 = region.h_ifc
    x0, x1 = -region.R_out, region.R_out
    y0, y1 = 0.0, region.R_out
    nx = int((x1 - x0) / h0) + 1
    ny = int((y1 - y0) / (h0 * math.sqrt(3) / 2)) + 1
    gx, gy = np.meshgrid(np.arange(nx), np.arange(ny))
    px = x0 + gx * h0 + (gy % 2) * h0 / 2
    py = y0 + gy * h0 * math.sqrt(3) / 2
    pts = np.column_stack([px.ravel(), py.ravel()])
    margin = 0.3 * h0
    inside = region.signed_distance(pts) < -margin
    pts = pts[inside]
    keep_prob = (h0 / region.sizing(pts)) ** 2
    pts = pts[rng.random(len(pts)) < keep_prob]
    return pts


def _arc_points(center, radius, phi_a, phi_b, step_fn, endpoint_a, endpoint_b):
    """Nodes along a circular arc from phi_a to phi_b; endpoints are the
    exact coordinates provided (shared with neighboring patches)."""

    def step(phi):
        x = center[0] + radius * math.cos(phi)
        y = center[1] + radius * math.sin(phi)
        return step_fn(x, y) / radius

    phis = _march_interval(phi_a, phi_b, step)
    inner = phis[1:-1]
    pts = np.column_stack(
        [center[0] + radius * np.cos(inner), center[1] + radius * np.sin(inner)]
    )
    return np.vstack([[endpoint_a], pts, [endpoint_b]])


def build_mesh(domain: DomainSpec, params: MeshParams | None = None) -> Mesh:
    """Graded conforming triangulation of the two-disk domain.

    Deterministic for fixed inputs.  Raises MeshError for delta = 0
    (touching disks cannot be meshed; use the tied-solve ladder instead)
    or when the quality floor is violated.
    """
    params = params or MeshParams()
    pair = domain.pair
    if pair.delta <= 0.0:
        raise MeshError(
            "touching geometry (delta = 0) is not meshable; approximate the "
            "limit with a ladder of small positive delta"
        )
    R = pair.R
    N = params.neck_layers
    if pair.delta / N > pair.delta / 4 + 1e-15:
        raise MeshError("neck grading must keep at least 4 layers across the gap")

    strip_nodes, strip_tris, strip_tags, xs = _build_strip(domain, params)
    xs_half = xs[-1]
    gap_ifc = 2.0 * R + pair.delta - 2.0 * math.sqrt(R * R - xs_half * xs_half)
    h_ifc = gap_ifc / N
    region = _UpperRegion(domain, params, xs_half, h_ifc)

    def hsize(x, y):
        return float(region.sizing(np.array([[x, y]]))[0])

    # fixed boundary nodes of the upper region -------------------------------
    M = len(xs)
    N1 = N + 1

    def strip_node(i, j):
        return strip_nodes[i * N1 + j]

    corner_r = strip_node(M - 1, N)  # (+xs_half, on particle 2)
    corner_l = strip_node(0, N)  # (-xs_half, on particle 2)
    seam_r = strip_node(M - 1, N // 2)  # (+xs_half, 0)
    seam_l = strip_node(0, N // 2)  # (-xs_half, 0)

    cy = R + 0.5 * pair.delta
    phi_r = math.atan2(corner_r[1] - cy, corner_r[0])
    phi_l = math.atan2(corner_l[1] - cy, corner_l[0])
    arc2 = _arc_points((0.0, cy), R, phi_r, phi_l + 2.0 * math.pi, hsize, corner_r, corner_l)

    outer_right = np.array([domain.R_out, 0.0])
    outer_left = np.array([-domain.R_out, 0.0])
    outer_arc = _arc_points(
        (0.0, 0.0), domain.R_out, 0.0, math.pi, hsize, outer_right, outer_left
    )

    seam_right = _march_interval(xs_half, domain.R_out, lambda x: hsize(x, 0.0))
    seam_left = -seam_right
    seam_right_pts = np.column_stack([seam_right[1:-1], np.zeros(len(seam_right) - 2)])
    seam_left_pts = np.column_stack([seam_left[1:-1], np.zeros(len(seam_left) - 2)])

    iface_r = np.array([strip_node(M - 1, j) for j in range(N // 2 + 1, N)])
    iface_l = np.array([strip_node(0, j) for j in range(N // 2 + 1, N)])
    if len(iface_r) == 0:
        iface_r = np.empty((0, 2))
        iface_l = np.empty((0, 2))

    fixed_parts = [
        (arc2, TAG_P2),
        (outer_arc, TAG_OUTER),
        (seam_right_pts, TAG_INTERIOR),
        (seam_left_pts, TAG_INTERIOR),
        (np.array([seam_r, seam_l]), TAG_INTERIOR),
        (iface_r, TAG_INTERIOR),
        (iface_l, TAG_INTERIOR),
    ]
    fixed = np.vstack([p for p, _ in fixed_parts if len(p)])
    fixed_tags = np.concatenate(
        [np.full(len(p), t, dtype=np.int8) for p, t in fixed_parts if len(p)]
    )

    rng = np.random.default_rng(params.seed)
    seed_pts = _hex_seed(region, rng)
    interior = _relax_points(region, fixed, seed_pts, params.relax_iters)

    upper_pts = np.vstack([fixed, interior])
    upper_tags = np.concatenate([fixed_tags, np.full(len(interior), TAG_INTERIOR, np.int8)])
    tri = Delaunay(upper_pts)
    cent = upper_pts[tri.simplices].mean(axis=1)
    keep = region.signed_distance(cent) < 0.0
    p = upper_pts[tri.simplices]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 2, 0] - p[:, 0, 0]
    ) * (p[:, 1, 1] - p[:, 0, 1])
    keep &= np.abs(area2) > 1e-14 * region.h_ifc**2
    upper_tris = tri.simplices[keep]

    # merge strip + upper + mirrored lower ------------------------------------
    index = {}
    g_nodes = []
    g_tags = []

    def add_node(x, y, tag):
        key = (float(x), float(y) + 0.0)
        gid = index.get(key)
        if gid is None:
            gid = len(g_nodes)
            index[key] = gid
            g_nodes.append((key[0], key[1]))
            g_tags.append(tag)
        elif tag != TAG_INTERIOR and g_tags[gid] == TAG_INTERIOR:
            g_tags[gid] = tag
        return gid

    g_tris = []

    strip_gids = [
        add_node(xy[0], xy[1], int(t)) for xy, t in zip(strip_nodes, strip_tags)
    ]
    for a, b, c in strip_tris:
        g_tris.append((strip_gids[a], strip_gids[b], strip_gids[c]))

    upper_gids = [
        add_node(xy[0], xy[1], int(t)) for xy, t in zip(upper_pts, upper_tags)
    ]
    for a, b, c in upper_tris:
        g_tris.append((upper_gids[a], upper_gids[b], upper_gids[c]))

    mirror_tag = {TAG_INTERIOR: TAG_INTERIOR, TAG_OUTER: TAG_OUTER, TAG_P2: TAG_P1}
    lower_gids = [
        add_node(xy[0], -xy[1], mirror_tag[int(t)]) for xy, t in zip(upper_pts, upper_tags)
    ]
    for a, b, c in upper_tris:
        g_tris.append((lower_gids[a], lower_gids[c], lower_gids[b]))

    mesh = Mesh(
        nodes=np.asarray(g_nodes),
        triangles=np.asarray(g_tris, dtype=np.int64),
        node_tags=np.asarray(g_tags, dtype=np.int8),
        h_neck=pair.delta / N,
        h_far=params.h_far,
        domain=domain,
    )
    _validate(mesh, params)
    return mesh


def _polygon_area(loop_pts: np.ndarray) -> float:
    x, y = loop_pts[:, 0], loop_pts[:, 1]
    return 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _validate(mesh: Mesh, params: MeshParams) -> None:
    res = mesh.boundary_node_residuals()
    if res > 1e-12:
        raise MeshError(f"boundary node off its curve by {res:.3e} R")
    # the triangles must tile the polygonal domain exactly: compare the
    # summed element area against the shoelace area of the boundary loops
    covered = float(np.sum(mesh.areas))
    loops = 0.0
    for tag, sign in ((TAG_OUTER, 1.0), (TAG_P1, -1.0), (TAG_P2, -1.0)):
        edges, _ = mesh.boundary_edges[tag]
        if len(edges) == 0:
            continue
        loop = _order_loop(edges)
        loops += sign * _polygon_area(mesh.nodes[loop])
    if abs(covered - loops) > 1e-9 * max(covered, 1e-300):
        raise MeshError(
            f"mesh does not tile the domain: covered {covered!r} vs boundary {loops!r}"
        )
    q = mesh.quality()
    if float(np.min(q)) < params.quality_floor:
        raise MeshError(
            f"element quality {float(np.min(q)):.4f} below floor {params.quality_floor}"
        )


def _order_loop(edges: np.ndarray) -> np.ndarray:
    """Order an edge soup into a single closed node loop."""
    nxt = {}
    for a, b in edges:
        nxt.setdefault(int(a), []).append(int(b))
        nxt.setdefault(int(b), []).append(int(a))
    start = int(edges[0, 0])
    loop = [start]
    prev = None
    cur = start
    for _ in range(len(edges)):
        cands = [n for n in nxt[cur] if n != prev]
        if not cands:
            raise MeshError("open boundary loop")
        prev, cur = cur, cands[0]
        if cur == start:
            break
        loop.append(cur)
    if len(loop) != len(edges):
        raise MeshError("boundary loop does not close consistently")
    return np.asarray(loop)


# -----------------------------------------------------------------------------
# annulus
# -----------------------------------------------------------------------------


def build_annulus_mesh(annulus: AnnulusSpec, h: float) -> Mesh:
    """Structured polar triangulation of an annulus.

    The inner circle is tagged as particle 1 (the single inclusion), the
    outer circle as the outer boundary.  Node counts scale as 1/h in both
    directions, so halving h refines uniformly.
    """
    if h <= 0:
        raise MeshError("mesh size must be positive")
    r1, r2 = annulus.r_inner, annulus.r_outer
    n_r = max(2, int(math.ceil((r2 - r1) / h)))
    r_mid = 0.5 * (r1 + r2)
    n_t = max(8, int(math.ceil(2.0 * math.pi * r_mid / h)))
    radii = np.linspace(r1, r2, n_r + 1)
    theta = 2.0 * math.pi * np.arange(n_t) / n_t

    nodes = np.empty(((n_r + 1) * n_t, 2))
    tags = np.zeros((n_r + 1) * n_t, dtype=np.int8)
    for k, r in enumerate(radii):
        nodes[k * n_t : (k + 1) * n_t, 0] = r * np.cos(theta)
        nodes[k * n_t : (k + 1) * n_t, 1] = r * np.sin(theta)
    tags[:n_t] = TAG_P1
    tags[n_r * n_t :] = TAG_OUTER

    tris = []
    for k in range(n_r):
        base0, base1 = k * n_t, (k + 1) * n_t
        for j in range(n_t):
            jn = (j + 1) % n_t
            a, b = base0 + j, base0 + jn
            c, d = base1 + jn, base1 + j
            tris.extend([(a, b, c), (a, c, d)])
    return Mesh(
        nodes=nodes,
        triangles=np.asarray(tris, dtype=np.int64),
        node_tags=tags,
        h_neck=(r2 - r1) / n_r,
        h_far=h,
        domain=annulus,
    )


# -----------------------------------------------------------------------------
# plain-text serialization
# -----------------------------------------------------------------------------


def save_mesh_text(mesh: Mesh, path, values: np.ndarray | None = None,
                   header_lines: tuple[str, ...] = ()) -> None:
    """Write the mesh (and optional nodal values) in the documented plain
    text format: `node i x y tag`, `tri i a b c`, `value i u` records."""
    with open(path, "w") as f:
        f.write("# gaplaw mesh/text v1\n")
        for line in header_lines:
            f.write(f"# {line}\n")
        f.write(f"counts {mesh.n_nodes} {mesh.n_triangles} {1 if values is not None else 0}\n")
        f.write(f"sizes {float(mesh.h_neck)!r} {float(mesh.h_far)!r}\n")
        for i, ((x, y), t) in enumerate(zip(mesh.nodes, mesh.node_tags)):
            f.write(f"node {i} {float(x)!r} {float(y)!r} {_TAG_NAMES[int(t)]}\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            f.write(f"tri {i} {a} {b} {c}\n")
        if values is not None:
            for i, v in enumerate(values):
                f.write(f"value {i} {float(v)!r}\n")


def load_mesh_text(path) -> tuple[Mesh, np.ndarray | None]:
    """Read a mesh written by save_mesh_text; returns (mesh, values|None)."""
    name_to_tag = {v: k for k, v in _TAG_NAMES.items()}
    nodes, tags, tris, values = [], [], [], []
    h_neck = h_far = 0.0
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts or parts[0] == "#":
                continue
            if parts[0] == "sizes":
                h_neck, h_far = float(parts[1]), float(parts[2])
            elif parts[0] == "node":
                nodes.append((float(parts[2]), float(parts[3])))
                tags.append(name_to_tag[parts[4]])
            elif parts[0] == "tri":
                tris.append((int(parts[2]), int(parts[3]), int(parts[4])))
            elif parts[0] == "value":
                values.append(float(parts[2]))
    mesh = Mesh(
        nodes=np.asarray(nodes),
        triangles=np.asarray(tris, dtype=np.int64),
        node_tags=np.asarray(tags, dtype=np.int8),
        h_neck=h_neck,
        h_far=h_far,
    )
    return mesh, (np.asarray(values) if values else None)
