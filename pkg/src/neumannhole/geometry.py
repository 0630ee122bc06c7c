"""Domains, holes, the axis-ray condition and nested structured meshes.

Every mesh is cut from one structured background grid over the bounding box
of the domain.  The mesh of the perforated domain is obtained from the mesh
of the full domain by deleting triangles (fat holes) or by duplicating the
nodes along a slit (zero-thickness holes), so both meshes share node
coordinates bit for bit and the restriction/extension maps between them are
plain index maps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryError, InvalidSpecError, ResolutionError

_ON_TOL = 1e-12

DOMAIN_KINDS = ("rectangle", "disk")
HOLE_KINDS = ("none", "disk", "convex-polygon", "segment-slit", "L-slit", "split-ring")
SLIT_KINDS = ("segment-slit", "L-slit", "split-ring")


@dataclass(frozen=True)
class DomainSpec:
    """The unperturbed domain.

    ``corners`` is ``(x0, y0, x1, y1)`` for rectangles; disks are regular
    polygons with ``segments`` sides inscribed in the circle.
    """

    kind: str = "rectangle"
    corners: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    segments: int = 64

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> DomainSpec:
        return cls(kind="rectangle", corners=(float(x0), float(y0), float(x1), float(y1)))

    @classmethod
    def unit_square(cls) -> DomainSpec:
        return cls.rectangle(0.0, 0.0, 1.0, 1.0)

    @classmethod
    def disk(cls, center, radius: float, segments: int = 64) -> DomainSpec:
        return cls(kind="disk", center=(float(center[0]), float(center[1])),
                   radius=float(radius), segments=int(segments))


@dataclass(frozen=True)
class HoleSpec:
    """A compact hole inside the ball of radius ``eps`` around ``center``.

    ``gap`` is the fraction of the ring perimeter left open for split rings;
    ``vertices`` are convex-polygon corners in units of ``eps`` relative to
    ``center``.
    """

    kind: str = "disk"
    center: tuple[float, float] = (0.5, 0.5)
    eps: float = 0.1
    gap: float = 0.1
    segments: int = 64
    vertices: tuple[tuple[float, float], ...] | None = None

    def with_eps(self, eps: float) -> HoleSpec:
        return HoleSpec(kind=self.kind, center=self.center, eps=float(eps), gap=self.gap,
                        segments=self.segments, vertices=self.vertices)

    @property
    def is_slit(self) -> bool:
        return self.kind in SLIT_KINDS


@dataclass(frozen=True)
class Hole:
    """Geometry of a hole: closed polygons bound fat parts, polylines are slits."""

    spec: HoleSpec
    polygons: tuple[np.ndarray, ...] = ()
    polylines: tuple[np.ndarray, ...] = ()

    @property
    def is_empty(self) -> bool:
        return not self.polygons and not self.polylines

    def segments(self) -> np.ndarray:
        """All boundary/slit segments as an ``(S, 2, 2)`` array."""
        segs = []
        for poly in self.polygons:
            segs.append(np.stack([poly, np.roll(poly, -1, axis=0)], axis=1))
        for line in self.polylines:
            segs.append(np.stack([line[:-1], line[1:]], axis=1))
        if not segs:
            return np.zeros((0, 2, 2))
        return np.concatenate(segs, axis=0)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Points inside a fat part (slits have empty interior)."""
        pts = np.atleast_2d(pts)
        inside = np.zeros(len(pts), dtype=bool)
        for poly in self.polygons:
            inside |= points_in_polygon(pts, poly)
        return inside

    def on_boundary(self, pts: np.ndarray, tol: float = _ON_TOL) -> np.ndarray:
        pts = np.atleast_2d(pts)
        segs = self.segments()
        if len(segs) == 0:
            return np.zeros(len(pts), dtype=bool)
        return _point_segment_distance(pts, segs).min(axis=1) <= tol


@dataclass
class PropertyStarReport:
    compliant: bool
    witness: tuple[float, float] | None
    samples_tested: int
    # per witness: which of (up, down, left, right) hit the hole
    witness_hits: dict[str, bool] = field(default_factory=dict)
    grid_n: int = 0


@dataclass(eq=False)
class Mesh:
    """Conforming P1 triangulation.

    ``parent_map[i]`` is the index of node ``i`` in the parent (unperturbed)
    mesh; ``None`` for parent meshes.  ``cell_tri`` maps background grid
    half-cells ``2 * (j * nx + i) + half`` to triangle indices (``-1`` when the
    half-cell is not part of the mesh); it makes point location O(1).
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    h: float
    grid: tuple[float, float, float, float, int, int]
    cell_tri: np.ndarray
    parent_map: np.ndarray | None = None
    slit_nodes: np.ndarray | None = None
    duplicated_nodes: np.ndarray | None = None
    removed_triangles: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        return signed_areas(self.nodes, self.triangles)

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def area(self) -> float:
        return float(self.areas().sum())

    def check(self) -> None:
        """Assert the mesh invariants; raises :class:`GeometryError`."""
        a = self.areas()
        if np.any(a <= 0.0):
            bad = int(np.flatnonzero(a <= 0.0)[0])
            raise GeometryError(f"triangle {bad} has nonpositive signed area {a[bad]:g}")
        if self.triangles.min() < 0 or self.triangles.max() >= self.n_nodes:
            raise GeometryError("triangle references a missing node")

    def locate(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Triangle index and barycentric coordinates of each point.

        Points off the mesh get triangle ``-1``.  Points on a grid line are
        assigned to the lower-left cell, which is harmless for continuous
        fields and deterministic for fields with slits.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, y0, hx, hy, nx, ny = self.grid
        s = (pts[:, 0] - x0) / hx
        t = (pts[:, 1] - y0) / hy
        i = np.floor(s).astype(int)
        j = np.floor(t).astype(int)
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        i = np.clip(i, 0, nx - 1)
        j = np.clip(j, 0, ny - 1)
        fs = s - i
        ft = t - j
        # cells are split along the diagonal from (i, j) to (i+1, j+1)
        upper = ft > fs
        cell = 2 * (j * nx + i) + upper.astype(int)
        tri = np.where(ok, self.cell_tri[cell], -1)
        bary = np.zeros((len(pts), 3))
        found = tri >= 0
        if np.any(found):
            v = self.nodes[self.triangles[tri[found]]]
            bary[found] = _barycentric(pts[found], v)
        return tri, bary

    def evaluate(self, u: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Point values of the P1 field ``u``; raises if a point is off the mesh."""
        tri, bary = self.locate(pts)
        if np.any(tri < 0):
            bad = np.atleast_2d(pts)[np.flatnonzero(tri < 0)[0]]
            raise GeometryError(f"point ({bad[0]:.6g}, {bad[1]:.6g}) lies outside the mesh")
        return np.einsum("pk,pk->p", u[self.triangles[tri]], bary)

    def export(self, path: str | Path) -> None:
        """Write the plain-text node/element/boundary format."""
        write_mesh(self, path)


# ---------------------------------------------------------------------------
# small geometric kernels


def signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = nodes[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def shoelace_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd crossing test, vectorized over points."""
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    xa, ya = poly[:, 0][None, :], poly[:, 1][None, :]
    xb, yb = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    straddle = (ya > y) != (yb > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = xa + (y - ya) * (xb - xa) / (yb - ya)
    crossings = straddle & (x < xcross)
    return (crossings.sum(axis=1) % 2) == 1


def _barycentric(pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = pts - v[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def _point_segment_distance(pts: np.ndarray, segs: np.ndarray) -> np.ndarray:
    a = segs[None, :, 0, :]
    d = segs[None, :, 1, :] - a
    r = pts[:, None, :] - a
    dd = np.einsum("psk,psk->ps", d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dd > 0, np.einsum("psk,psk->ps", r, d) / dd, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(r - t[..., None] * d, axis=2)


def _segments_intersect(p: np.ndarray, q: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Closed-segment intersection of ``[p_i, q_i]`` against every segment.

    Returns an ``(P, S)`` boolean array.  Collinear overlaps count as hits.
    """
    a = segs[None, :, 0, :]
    b = segs[None, :, 1, :]
    p = p[:, None, :]
    q = q[:, None, :]

    def orient(u, v, w):
        return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - \
               (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

    def on_seg(u, v, w):
        return (np.minimum(u[..., 0], v[..., 0]) - _ON_TOL <= w[..., 0]) & \
               (w[..., 0] <= np.maximum(u[..., 0], v[..., 0]) + _ON_TOL) & \
               (np.minimum(u[..., 1], v[..., 1]) - _ON_TOL <= w[..., 1]) & \
               (w[..., 1] <= np.maximum(u[..., 1], v[..., 1]) + _ON_TOL)

    d1 = orient(a, b, p)
    d2 = orient(a, b, q)
    d3 = orient(p, q, a)
    d4 = orient(p, q, b)
    z1, z2, z3, z4 = (np.abs(d) <= _ON_TOL for d in (d1, d2, d3, d4))
    proper = (np.sign(d1) * np.sign(d2) < 0) & (np.sign(d3) * np.sign(d4) < 0)
    touch = (z1 & on_seg(a, b, p)) | (z2 & on_seg(a, b, q)) | \
            (z3 & on_seg(p, q, a)) | (z4 & on_seg(p, q, b))
    return proper | touch


# ---------------------------------------------------------------------------
# domains and holes


def build_domain(spec: DomainSpec) -> np.ndarray:
    """Closed counterclockwise boundary polygon of the domain (first vertex not repeated)."""
    if spec.kind == "rectangle":
        x0, y0, x1, y1 = spec.corners
        if not (x1 > x0 and y1 > y0):
            raise InvalidSpecError("domain: degenerate rectangle", field="domain.corners")
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    if spec.kind == "disk":
        if not spec.radius > 0:
            raise InvalidSpecError("domain: radius must be positive", field="domain.radius")
        if spec.segments < 16:
            raise InvalidSpecError("domain: disk needs at least 16 segments", field="domain.segments")
        phi = 2.0 * np.pi * np.arange(spec.segments) / spec.segments
        cx, cy = spec.center
        return np.stack([cx + spec.radius * np.cos(phi), cy + spec.radius * np.sin(phi)], axis=1)
    raise InvalidSpecError(f"domain: unknown kind {spec.kind!r}", field="domain.kind")


def _square_ring(center, half: float, gap: float) -> np.ndarray:
    """Square ring polyline with the gap centred on the lower-left corner."""
    cx, cy = center
    side = 2.0 * half
    perim = 4.0 * side
    g = gap * perim
    # arc length measured counterclockwise from the lower-left corner
    corners_s = [side, 2 * side, 3 * side]
    corners = [(cx + half, cy - half), (cx + half, cy + half), (cx - half, cy + half)]
    s_start, s_end = 0.5 * g, perim - 0.5 * g

    def at(s):
        k, r = divmod(s, side)
        k = int(k) % 4
        base = [(cx - half, cy - half), (cx + half, cy - half),
                (cx + half, cy + half), (cx - half, cy + half)][k]
        step = [(1, 0), (0, 1), (-1, 0), (0, -1)][k]
        return (base[0] + r * step[0], base[1] + r * step[1])

    pts = [at(s_start)]
    for s_c, c in zip(corners_s, corners):
        if s_start < s_c < s_end:
            pts.append(c)
    pts.append(at(s_end))
    return np.array(pts, dtype=float)


def build_hole(spec: HoleSpec) -> Hole:
    """Curves bounding the hole; everything lies in the closed ball ``B_eps(center)``."""
    if spec.kind not in HOLE_KINDS:
        raise InvalidSpecError(f"hole: unknown kind {spec.kind!r}", field="hole.kind")
    if spec.kind == "none":
        return Hole(spec)
    if not spec.eps > 0:
        raise InvalidSpecError("hole: eps must be positive", field="hole.eps")
    c = np.asarray(spec.center, dtype=float)
    eps = spec.eps
    polygons: tuple[np.ndarray, ...] = ()
    polylines: tuple[np.ndarray, ...] = ()
    if spec.kind == "disk":
        if spec.segments < 32:
            raise InvalidSpecError("hole: disk needs at least 32 segments", field="hole.segments")
        phi = 2.0 * np.pi * np.arange(spec.segments) / spec.segments
        polygons = (c + eps * np.stack([np.cos(phi), np.sin(phi)], axis=1),)
    elif spec.kind == "convex-polygon":
        rel = np.asarray(spec.vertices if spec.vertices is not None else
                         [(math.cos(a), math.sin(a)) for a in np.arange(6) * np.pi / 3], dtype=float)
        poly = c + eps * rel
        if shoelace_area(poly) < 0:
            poly = poly[::-1]
        if not _is_convex(poly):
            raise InvalidSpecError("hole: polygon is not convex", field="hole.vertices")
        polygons = (poly,)
    elif spec.kind == "segment-slit":
        polylines = (np.array([c - (eps, 0.0), c + (eps, 0.0)]),)
    elif spec.kind == "L-slit":
        a = eps / math.sqrt(2.0)
        polylines = (c + np.array([[-a, a], [-a, -a], [a, -a]]),)
    elif spec.kind == "split-ring":
        if not 0.0 < spec.gap < 1.0:
            raise InvalidSpecError("hole: split-ring gap fraction must lie in (0, 1)", field="hole.gap")
        polylines = (_square_ring(c, eps / math.sqrt(2.0), spec.gap),)
    hole = Hole(spec, polygons, polylines)
    pts = np.concatenate(list(polygons) + list(polylines))
    if np.max(np.linalg.norm(pts - c, axis=1)) > eps * (1.0 + 1e-9):
        raise InvalidSpecError("hole: geometry escapes the ball B_eps", field="hole")
    return hole


def _is_convex(poly: np.ndarray) -> bool:
    d = np.roll(poly, -1, axis=0) - poly
    cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
    return bool(np.all(cross >= -1e-14) or np.all(cross <= 1e-14))


def polyline_length(line: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(line, axis=0), axis=1).sum())


def boundary_clearance(domain_poly: np.ndarray, point) -> float:
    """Distance from ``point`` to the domain boundary (negative outside)."""
    p = np.atleast_2d(np.asarray(point, dtype=float))
    segs = np.stack([domain_poly, np.roll(domain_poly, -1, axis=0)], axis=1)
    d = float(_point_segment_distance(p, segs).min())
    return d if points_in_polygon(p, domain_poly)[0] else -d


def check_hole_fits(domain_poly: np.ndarray, spec: HoleSpec, factor: float = 1.0) -> None:
    """Require ``B_{factor * eps}(center)`` inside the domain with positive clearance."""
    if spec.kind == "none":
        return
    clear = boundary_clearance(domain_poly, spec.center)
    if clear <= factor * spec.eps:
        raise InvalidSpecError(
            f"hole: ball of radius {factor:g}*eps={factor * spec.eps:g} does not fit "
            f"(clearance {clear:g})", field="hole.eps")


# ---------------------------------------------------------------------------
# property*


def _ray_ends(domain_poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """First exit point from the domain along up/down/left/right; ``(P, 4, 2)``."""
    out = np.empty((len(pts), 4, 2))
    segs = np.stack([domain_poly, np.roll(domain_poly, -1, axis=0)], axis=1)
    a, b = segs[:, 0], segs[:, 1]
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        # vertical line x = x0 crossing each edge
        tx = (x - a[None, :, 0]) / (b[None, :, 0] - a[None, :, 0])
        yc = a[None, :, 1] + tx * (b[None, :, 1] - a[None, :, 1])
        hitv = (tx >= 0) & (tx <= 1) & np.isfinite(tx)
        ty = (y - a[None, :, 1]) / (b[None, :, 1] - a[None, :, 1])
        xc = a[None, :, 0] + ty * (b[None, :, 0] - a[None, :, 0])
        hith = (ty >= 0) & (ty <= 1) & np.isfinite(ty)
    up = np.where(hitv & (yc >= y), yc, np.inf).min(axis=1)
    down = np.where(hitv & (yc <= y), yc, -np.inf).max(axis=1)
    right = np.where(hith & (xc >= x), xc, np.inf).min(axis=1)
    left = np.where(hith & (xc <= x), xc, -np.inf).max(axis=1)
    out[:, 0] = np.stack([pts[:, 0], up], axis=1)
    out[:, 1] = np.stack([pts[:, 0], down], axis=1)
    out[:, 2] = np.stack([left, pts[:, 1]], axis=1)
    out[:, 3] = np.stack([right, pts[:, 1]], axis=1)
    return out


def ray_hits(domain_poly: np.ndarray, hole: Hole, pts: np.ndarray) -> np.ndarray:
    """For each point, whether the up/down/left/right ray to the boundary meets the hole."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    segs = hole.segments()
    if len(segs) == 0:
        return np.zeros((len(pts), 4), dtype=bool)
    ends = _ray_ends(domain_poly, pts)
    hits = np.empty((len(pts), 4), dtype=bool)
    for d in range(4):
        hits[:, d] = _segments_intersect(pts, ends[:, d], segs).any(axis=1)
    return hits


DIRECTIONS = ("up", "down", "left", "right")


def check_property_star(domain: DomainSpec, hole: Hole | HoleSpec | None,
                        grid_n: int = 64) -> PropertyStarReport:
    """Sample the axis-ray condition on a ``grid_n x grid_n`` grid of cell centres.

    A point passes when one of its four axis half-lines, run to the domain
    boundary, misses the hole.  The witness reported is the lexicographically
    smallest failing sample.
    """
    if grid_n < 16:
        raise InvalidSpecError("property-star: grid_n must be >= 16", field="grid_n")
    if isinstance(hole, HoleSpec):
        hole = build_hole(hole)
    poly = build_domain(domain)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    s = (np.arange(grid_n) + 0.5) / grid_n
    xs = lo[0] + s * (hi[0] - lo[0])
    ys = lo[1] + s * (hi[1] - lo[1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    pts = pts[points_in_polygon(pts, poly)]
    if hole is None or hole.is_empty:
        return PropertyStarReport(True, None, len(pts), grid_n=grid_n)
    keep = ~(hole.contains(pts) | hole.on_boundary(pts))
    pts = pts[keep]
    hits = ray_hits(poly, hole, pts)
    bad = np.flatnonzero(hits.all(axis=1))
    if len(bad) == 0:
        return PropertyStarReport(True, None, len(pts), grid_n=grid_n)
    order = np.lexsort((pts[bad, 1], pts[bad, 0]))
    k = bad[order[0]]
    w = (float(pts[k, 0]), float(pts[k, 1]))
    return PropertyStarReport(False, w, len(pts),
                              dict(zip(DIRECTIONS, map(bool, hits[k]))), grid_n=grid_n)


# ---------------------------------------------------------------------------
# meshing


def _background(poly: np.ndarray, h: float):
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    nx = max(1, int(math.ceil((hi[0] - lo[0]) / h - 1e-9)))
    ny = max(1, int(math.ceil((hi[1] - lo[1]) / h - 1e-9)))
    hx = (hi[0] - lo[0]) / nx
    hy = (hi[1] - lo[1]) / ny
    return float(lo[0]), float(lo[1]), hx, hy, nx, ny


def _grid_mesh(domain: DomainSpec, h: float) -> Mesh:
    poly = build_domain(domain)
    x0, y0, hx, hy, nx, ny = _background(poly, h)
    I, J = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    gx = x0 + I.ravel() * hx
    gy = y0 + J.ravel() * hy
    if domain.kind == "rectangle":
        # pin the far edges so they coincide with the corners exactly
        gx = np.where(I.ravel() == nx, domain.corners[2], gx)
        gy = np.where(J.ravel() == ny, domain.corners[3], gy)
    gnodes = np.stack([gx, gy], axis=1)

    ci, cj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ci, cj = ci.ravel(), cj.ravel()
    n00 = cj * (nx + 1) + ci
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    lower = np.stack([n00, n10, n11], axis=1)
    upper = np.stack([n00, n11, n01], axis=1)
    tris = np.empty((2 * len(n00), 3), dtype=np.int64)
    tris[0::2] = lower
    tris[1::2] = upper
    cent = gnodes[tris].mean(axis=1)
    keep = np.ones(len(tris), dtype=bool) if domain.kind == "rectangle" else points_in_polygon(cent, poly)
    tris = tris[keep]
    used = np.unique(tris)
    remap = -np.ones(len(gnodes), dtype=np.int64)
    remap[used] = np.arange(len(used))
    cell_tri = -np.ones(2 * nx * ny, dtype=np.int64)
    cell_tri[np.flatnonzero(keep)] = np.arange(int(keep.sum()))
    nodes = gnodes[used]
    tris = remap[tris]
    bedges = _boundary_edges(tris)
    mesh = Mesh(nodes=nodes, triangles=tris, boundary_edges=bedges,
                boundary_tags=np.zeros(len(bedges), dtype=np.int8),
                h=float(max(hx, hy)), grid=(x0, y0, hx, hy, nx, ny), cell_tri=cell_tri)
    mesh.check()
    return mesh


def _boundary_edges(tris: np.ndarray) -> np.ndarray:
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, idx, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    # oriented as in their (counterclockwise) triangle
    return e[np.sort(idx[counts == 1])]


def _snap_polyline(line: np.ndarray, mesh: Mesh) -> list[tuple[int, int]]:
    """Snap an axis-aligned polyline to grid nodes; returns unit grid steps as (i, j) pairs."""
    x0, y0, hx, hy, nx, ny = mesh.grid
    ij = np.column_stack([np.rint((line[:, 0] - x0) / hx), np.rint((line[:, 1] - y0) / hy)]).astype(int)
    path = [tuple(ij[0])]
    for a, b in zip(ij[:-1], ij[1:]):
        if a[0] != b[0] and a[1] != b[1]:
            raise ResolutionError("slit segments must be axis aligned")
        step = np.sign(b - a)
        cur = a.copy()
        while tuple(cur) != tuple(b):
            cur = cur + step
            path.append(tuple(cur))
    # drop consecutive duplicates from degenerate snapped pieces
    out = [path[0]]
    for p in path[1:]:
        if p != out[-1]:
            out.append(p)
    return out


def _crack(mesh: Mesh, parent_nodes: np.ndarray, slit_pairs: set[tuple[int, int]],
           slit_nodes: np.ndarray):
    """Duplicate slit nodes so the two faces of each slit edge are disconnected."""
    tris = mesh.triangles.copy()
    nodes = list(parent_nodes)
    parent_map = list(range(len(parent_nodes)))
    duplicated = []
    node_tris: dict[int, list[int]] = {int(v): [] for v in slit_nodes}
    for t, tri in enumerate(tris):
        for v in tri:
            if int(v) in node_tris:
                node_tris[int(v)].append(t)
    for v in sorted(node_tris):
        inc = node_tris[v]
        # union-find over incident triangles joined by non-slit edges through v
        parent = {t: t for t in inc}

        def find(t):
            while parent[t] != t:
                parent[t] = parent[parent[t]]
                t = parent[t]
            return t

        by_edge: dict[int, list[int]] = {}
        for t in inc:
            for w in tris[t]:
                w = int(w)
                if w != v and (min(v, w), max(v, w)) not in slit_pairs:
                    by_edge.setdefault(w, []).append(t)
        for ts in by_edge.values():
            for t in ts[1:]:
                ra, rb = find(ts[0]), find(t)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        comps: dict[int, list[int]] = {}
        for t in inc:
            comps.setdefault(find(t), []).append(t)
        for root in sorted(comps)[1:]:
            new = len(nodes)
            nodes.append(parent_nodes[v])
            parent_map.append(v)
            duplicated.append(new)
            for t in comps[root]:
                tris[t][tris[t] == v] = new
    return (np.array(nodes), tris, np.array(parent_map, dtype=np.int64),
            np.array(duplicated, dtype=np.int64))


def triangulate(domain: DomainSpec, hole: Hole | HoleSpec | None, h: float,
                parent: Mesh | None = None) -> Mesh:
    """Structured mesh of the domain, or of the domain minus ``hole``.

    With a hole, the result is derived from ``parent`` (built on demand) so
    that its ``parent_map`` is exact.
    """
    if not h > 0:
        raise InvalidSpecError("mesh: h must be positive", field="h")
    if isinstance(hole, HoleSpec):
        hole = build_hole(hole)
    if parent is None:
        parent = _grid_mesh(domain, h)
    if hole is None or hole.is_empty:
        if parent.parent_map is not None:
            raise GeometryError("parent mesh must be an unperturbed mesh")
        if hole is None:
            return parent
        return _submesh(parent, np.ones(parent.n_triangles, dtype=bool), hole_tag_from=None)

    poly = build_domain(domain)
    check_hole_fits(poly, hole.spec)
    if parent.h >= boundary_clearance(poly, hole.spec.center) - hole.spec.eps:
        raise ResolutionError("mesh: h exceeds the clearance between hole and boundary")
    if parent.h >= hole.spec.eps:
        raise ResolutionError(f"mesh: h={parent.h:g} too coarse to resolve hole of size eps={hole.spec.eps:g}")

    if hole.polygons:
        keep = ~hole.contains(parent.centroids())
        if keep.all():
            raise ResolutionError("mesh: no element centroid falls inside the hole")
        sub = _submesh(parent, keep, hole_tag_from=parent)
        sub.check()
        return sub

    # slits: crack insertion along snapped grid edges
    x0, y0, hx, hy, nx, ny = parent.grid
    grid_to_node = -np.ones((nx + 1) * (ny + 1), dtype=np.int64)
    gi = np.rint((parent.nodes[:, 0] - x0) / hx).astype(int)
    gj = np.rint((parent.nodes[:, 1] - y0) / hy).astype(int)
    grid_to_node[gj * (nx + 1) + gi] = np.arange(parent.n_nodes)
    slit_pairs: set[tuple[int, int]] = set()
    slit_set: set[int] = set()
    for line in hole.polylines:
        path = _snap_polyline(line, parent)
        if len(path) < 2:
            raise ResolutionError("mesh: slit shorter than one grid edge")
        ids = [int(grid_to_node[j * (nx + 1) + i]) for i, j in path]
        if min(ids) < 0:
            raise ResolutionError("mesh: slit leaves the meshed domain")
        if ids[0] == ids[-1]:
            raise ResolutionError("mesh: split-ring gap closed by grid snapping; refine h")
        for a, b in zip(ids[:-1], ids[1:]):
            slit_pairs.add((min(a, b), max(a, b)))
        slit_set.update(ids)
    slit_nodes = np.array(sorted(slit_set), dtype=np.int64)
    nodes, tris, pmap, dup = _crack(parent, parent.nodes, slit_pairs, slit_nodes)
    bedges = _boundary_edges(tris)
    outer = _outer_edge_keys(parent)
    tags = np.array([0 if (min(pmap[a], pmap[b]), max(pmap[a], pmap[b])) in outer else 1
                     for a, b in bedges], dtype=np.int8)
    mesh = Mesh(nodes=nodes, triangles=tris, boundary_edges=bedges, boundary_tags=tags,
                h=parent.h, grid=parent.grid, cell_tri=parent.cell_tri.copy(),
                parent_map=pmap, slit_nodes=slit_nodes, duplicated_nodes=dup,
                removed_triangles=np.zeros(0, dtype=np.int64))
    mesh.check()
    return mesh


def _outer_edge_keys(parent: Mesh) -> set[tuple[int, int]]:
    return {(int(min(a, b)), int(max(a, b))) for a, b in parent.boundary_edges}


def _submesh(parent: Mesh, keep: np.ndarray, hole_tag_from: Mesh | None) -> Mesh:
    tris = parent.triangles[keep]
    used = np.unique(tris)
    remap = -np.ones(parent.n_nodes, dtype=np.int64)
    remap[used] = np.arange(len(used))
    new_tris = remap[tris]
    new_index = -np.ones(parent.n_triangles, dtype=np.int64)
    new_index[np.flatnonzero(keep)] = np.arange(int(keep.sum()))
    cell_tri = np.where(parent.cell_tri >= 0, new_index[np.maximum(parent.cell_tri, 0)], -1)
    bedges = _boundary_edges(new_tris)
    outer = _outer_edge_keys(parent)
    tags = np.array([0 if (int(min(used[a], used[b])), int(max(used[a], used[b]))) in outer else 1
                     for a, b in bedges], dtype=np.int8)
    return Mesh(nodes=parent.nodes[used], triangles=new_tris, boundary_edges=bedges,
                boundary_tags=tags, h=parent.h, grid=parent.grid, cell_tri=cell_tri,
                parent_map=used.astype(np.int64), slit_nodes=np.zeros(0, dtype=np.int64),
                duplicated_nodes=np.zeros(0, dtype=np.int64),
                removed_triangles=np.flatnonzero(~keep))


def hole_interior_nodes(parent: Mesh, child: Mesh) -> np.ndarray:
    """Parent nodes that have no copy in the perforated mesh."""
    present = np.zeros(parent.n_nodes, dtype=bool)
    present[child.parent_map] = True
    return np.flatnonzero(~present)


def removed_extent(parent: Mesh, child: Mesh, center) -> float:
    """Largest distance from ``center`` of a vertex of a removed triangle or slit node."""
    c = np.asarray(center, dtype=float)
    idx = []
    if child.removed_triangles is not None and len(child.removed_triangles):
        idx.append(parent.triangles[child.removed_triangles].ravel())
    if child.slit_nodes is not None and len(child.slit_nodes):
        idx.append(child.slit_nodes)
    if not idx:
        return 0.0
    pts = parent.nodes[np.unique(np.concatenate(idx))]
    return float(np.linalg.norm(pts - c, axis=1).max())


# ---------------------------------------------------------------------------
# text export


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    tag_names = {0: "outer", 1: "hole"}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes {mesh.n_nodes}\n")
        for i, (x, y) in enumerate(mesh.nodes):
            fh.write(f"{i} {float(x)!r} {float(y)!r}\n")
        fh.write(f"# triangles {mesh.n_triangles}\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"{i} {a} {b} {c}\n")
        fh.write(f"# boundary {len(mesh.boundary_edges)}\n")
        for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{a} {b} {tag_names[int(t)]}\n")


def read_mesh(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """Parse the text format back into nodes, triangles, boundary edges and tags."""
    section = None
    nodes, tris, edges, tags = [], [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                section = line.split()[1]
                continue
            parts = line.split()
            if section == "nodes":
                nodes.append((float(parts[1]), float(parts[2])))
            elif section == "triangles":
                tris.append(tuple(int(p) for p in parts[1:4]))
            elif section == "boundary":
                edges.append((int(parts[0]), int(parts[1])))
                tags.append(parts[2])
    return np.array(nodes), np.array(tris, dtype=np.int64), np.array(edges, dtype=np.int64), tags
