"""Identification operators between the full and the perforated domain.

``J`` (= ``J1``) restricts a nodal field from the full mesh to the perforated
mesh, ``J'`` extends by zero, and ``J1'`` extends radially: outside a
circle of radius ``rho`` around the hole centre it copies the field, inside
it scales the trace on that circle linearly in ``r``.  The estimators below
measure, over a finite test set, how far these maps are from satisfying the
seven closeness inequalities with ``delta = 0``.  Maxima over a finite test
set only bound the true operator constants from below.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import FormPair, norm0, norm1, norm2
from .errors import DegenerateInputError, GeometryError, InvalidSpecError
from .geometry import Mesh, hole_interior_nodes, removed_extent

N_PHI = 256
N_RADII = 32
CONDITIONS = ("1", "2", "3", "4", "5'", "6", "7")


@dataclass(eq=False)
class CouplingPair:
    omega: FormPair
    hole: FormPair
    center: tuple[float, float]
    eps: float

    def __post_init__(self):
        parent: Mesh = self.omega.mesh
        child: Mesh = self.hole.mesh
        if child.parent_map is None:
            raise GeometryError("perforated mesh carries no parent map")
        self.node_map = child.parent_map
        self.interior = hole_interior_nodes(parent, child)
        self.copies = np.bincount(self.node_map, minlength=parent.n_nodes)
        self.unique = self.copies == 1
        # parent index -> one child index (the first copy)
        first = -np.ones(parent.n_nodes, dtype=np.int64)
        rev = np.arange(child.n_nodes)[::-1]
        first[self.node_map[::-1]] = rev
        self.parent_to_child = first
        self.empty = len(self.interior) == 0 and bool(np.all(self.copies == 1))
        self.r_min = max(removed_extent(parent, child, self.center), self.eps)
        if not self.empty and self.r_min >= 2.0 * self.eps:
            raise GeometryError("removed region reaches 2*eps; refine the mesh")
        rel = parent.nodes - np.asarray(self.center)
        self.r = np.hypot(rel[:, 0], rel[:, 1])
        self.phi = np.arctan2(rel[:, 1], rel[:, 0])

    @property
    def parent_mesh(self) -> Mesh:
        return self.omega.mesh

    @property
    def child_mesh(self) -> Mesh:
        return self.hole.mesh

    def ball_mask(self, radius: float, mesh: Mesh | None = None) -> np.ndarray:
        """Elements with centroid in the ball of ``radius`` around the hole centre."""
        mesh = mesh or self.parent_mesh
        c = mesh.centroids() - np.asarray(self.center)
        return np.hypot(c[:, 0], c[:, 1]) < radius

    def annulus_mask(self, r0: float, r1: float, mesh: Mesh | None = None) -> np.ndarray:
        mesh = mesh or self.child_mesh
        c = mesh.centroids() - np.asarray(self.center)
        r = np.hypot(c[:, 0], c[:, 1])
        return (r >= r0) & (r < r1)


def restrict_J(cp: CouplingPair, f: np.ndarray) -> np.ndarray:
    """``J f = J1 f``: the values at the surviving nodes."""
    f = np.asarray(f)
    if f.shape[0] != cp.parent_mesh.n_nodes:
        raise InvalidSpecError("restrict_J: vector length does not match the full mesh")
    return f[cp.node_map]


def extend_zero_Jprime(cp: CouplingPair, u: np.ndarray) -> np.ndarray:
    """``J' u``: scatter to the full mesh, zero at nodes swallowed by the hole.

    Copies of a node split by a slit are averaged; away from slits this is an
    exact index scatter and ``J J' = id``.
    """
    u = np.asarray(u)
    if u.shape[0] != cp.child_mesh.n_nodes:
        raise InvalidSpecError("extend_zero_Jprime: vector length does not match the perforated mesh")
    out = np.zeros(cp.parent_mesh.n_nodes, dtype=u.dtype)
    if cp.unique.all() or np.all(cp.copies <= 1):
        out[cp.node_map] = u
        return out
    np.add.at(out, cp.node_map, u)
    multi = cp.copies > 1
    out[multi] = out[multi] / cp.copies[multi]
    return out


def circle_points(center, radius: float, n_phi: int = N_PHI) -> tuple[np.ndarray, np.ndarray]:
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    pts = np.asarray(center)[None, :] + radius * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    return phi, pts


def trace_on_circle(cp: CouplingPair, u: np.ndarray, radius: float, n_phi: int = N_PHI) -> np.ndarray:
    """P1 point values of ``u`` (perforated mesh) on the circle of ``radius``."""
    _, pts = circle_points(cp.center, radius, n_phi)
    try:
        return cp.child_mesh.evaluate(u, pts)
    except GeometryError as exc:
        raise GeometryError(f"circle of radius {radius:g} leaves the perforated mesh: {exc}") from exc


def angular_energy(values: np.ndarray) -> float:
    """``int_0^{2 pi} |d/dphi u|^2 dphi`` from equispaced samples (centred differences)."""
    n = len(values)
    dphi = 2.0 * np.pi / n
    d = (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dphi)
    return float(np.sum(np.abs(d) ** 2) * dphi)


def sample_radii(cp: CouplingPair, n: int = N_RADII) -> np.ndarray:
    """Radii spread over the open interval ``(r_lo, 2 eps)``.

    ``r_lo`` is ``eps`` pushed out past every removed element, so every
    sampled circle runs through surviving elements only.
    """
    lo, hi = cp.r_min, 2.0 * cp.eps
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


def choose_radius(cp: CouplingPair, u: np.ndarray, n_radii: int = N_RADII,
                  n_phi: int = N_PHI) -> tuple[float, float]:
    """Radius in ``(eps, 2 eps)`` with the least angular energy of ``u``; returns ``(rho, energy)``."""
    if cp.empty:
        return 0.0, 0.0
    radii = sample_radii(cp, n_radii)
    energies = np.array([angular_energy(trace_on_circle(cp, u, r, n_phi)) for r in radii])
    k = int(np.argmin(energies))
    return float(radii[k]), float(energies[k])


def annulus_energy(cp: CouplingPair, u: np.ndarray) -> float:
    """``int over eps < r < 2 eps of |grad u|^2 + |u|^2`` by element quadrature."""
    mask = cp.annulus_mask(cp.eps, 2.0 * cp.eps)
    _, M, K0 = cp.hole.restricted(mask)
    return float(np.vdot(u, K0 @ u).real + np.vdot(u, M @ u).real)


def extend_radial_J1prime(cp: CouplingPair, u: np.ndarray, rho: float | None = None,
                          n_phi: int = N_PHI) -> np.ndarray:
    """``J1' u``: copy outside ``B_rho``, ``(r / rho) u(rho, phi)`` inside."""
    u = np.asarray(u)
    if cp.empty:
        # nothing was removed, so the radial patch is the identity
        return extend_zero_Jprime(cp, u)
    if rho is None:
        rho, _ = choose_radius(cp, u, n_phi=n_phi)
    if not cp.eps < rho < 2.0 * cp.eps:
        raise InvalidSpecError(f"extension radius {rho:g} outside (eps, 2 eps)")
    out = np.zeros(cp.parent_mesh.n_nodes, dtype=complex if np.iscomplexobj(u) else float)
    outside = cp.r >= rho
    idx = cp.parent_to_child[outside]
    if np.any(idx < 0):
        raise GeometryError("node outside the extension ball has no copy in the perforated mesh")
    out[outside] = u[idx]
    inside = np.flatnonzero(~outside)
    if len(inside):
        pts = np.asarray(cp.center)[None, :] + rho * np.stack(
            [np.cos(cp.phi[inside]), np.sin(cp.phi[inside])], axis=1)
        vals = cp.child_mesh.evaluate(u, pts)
        out[inside] = (cp.r[inside] / rho) * vals
    return out


# ---------------------------------------------------------------------------
# test sets and delta estimates


@dataclass
class TestSet:
    __test__ = False  # not a pytest class

    f: list[np.ndarray]  # vectors on the full mesh
    u: list[np.ndarray]  # vectors on the perforated mesh
    description: str = ""
    seed: int | None = None


def smooth_bumps(mesh: Mesh, count: int, seed: int, domain_poly: np.ndarray | None = None,
                 per_bump: int = 3) -> list[np.ndarray]:
    """Complex combinations of Gaussian bumps centred inside the mesh bounding box."""
    rng = np.random.default_rng(seed)
    lo, hi = mesh.nodes.min(axis=0), mesh.nodes.max(axis=0)
    span = hi - lo
    out = []
    for _ in range(count):
        v = np.zeros(mesh.n_nodes, dtype=complex)
        for _ in range(per_bump):
            c = lo + span * rng.uniform(0.2, 0.8, size=2)
            w = rng.uniform(0.08, 0.2) * float(span.min())
            a = rng.normal() + 1j * rng.normal()
            d2 = np.sum((mesh.nodes - c) ** 2, axis=1)
            v += a * np.exp(-d2 / (2 * w * w))
        out.append(v)
    return out


def default_test_set(cp: CouplingPair, eig_omega, eig_hole, n_eig: int = 8, n_bumps: int = 8,
                     seed: int = 0) -> TestSet:
    """First eigenvectors of each side plus seeded smooth bump combinations."""
    fs = [eig_omega.eigenvectors[:, k] for k in range(min(n_eig, eig_omega.m))]
    us = [eig_hole.eigenvectors[:, k] for k in range(min(n_eig, eig_hole.m))]
    bumps = smooth_bumps(cp.parent_mesh, n_bumps, seed)
    fs += bumps
    us += [restrict_J(cp, b) for b in bumps]
    return TestSet(fs, us, f"{min(n_eig, eig_omega.m)} eigenvectors + {n_bumps} bumps (seed {seed})", seed)


@dataclass
class ClosenessReport:
    delta: dict[str, float]
    eps: float
    h: float
    test_set: str
    radii: list[float] = field(default_factory=list)
    lower_bound_note: str = "max over a finite test set; a lower bound on the operator constant"


def _nonzero(x: float, what: str) -> float:
    if x <= 0.0:
        raise DegenerateInputError(f"zero-norm test function in {what}")
    return x


class _Cache:
    """Per-test-set quantities shared between conditions."""

    def __init__(self, cp: CouplingPair, ts: TestSet):
        self.cp = cp
        self.ts = ts
        self._n = {}
        self._j1p = None
        self.radii: list[float] = []

    def norm(self, side: str, k: int, order: int) -> float:
        key = (side, k, order)
        if key not in self._n:
            fp = self.cp.omega if side == "f" else self.cp.hole
            vec = self.ts.f[k] if side == "f" else self.ts.u[k]
            fn = {0: norm0, 1: norm1, 2: norm2}[order]
            self._n[key] = _nonzero(fn(fp, vec), f"{side}[{k}] norm {order}")
        return self._n[key]

    def j1p(self) -> list[np.ndarray]:
        if self._j1p is None:
            self._j1p = []
            for u in self.ts.u:
                rho, _ = choose_radius(self.cp, u)
                self.radii.append(rho)
                self._j1p.append(extend_radial_J1prime(self.cp, u, rho))
        return self._j1p


def _estimate(cache: _Cache, cond: str) -> float:
    cp, ts = cache.cp, cache.ts
    Mo, Mh = cp.omega.M, cp.hole.M
    if cond == "1":
        # J and J1 are the same map
        return max(norm0(cp.hole, restrict_J(cp, f) - restrict_J(cp, f)) / cache.norm("f", k, 1)
                   for k, f in enumerate(ts.f))
    if cond == "2":
        best = 0.0
        for k, f in enumerate(ts.f):
            jf = restrict_J(cp, f)
            for l, u in enumerate(ts.u):
                lhs = np.vdot(u, Mh @ jf) - np.vdot(extend_zero_Jprime(cp, u), Mo @ f)
                best = max(best, float(abs(lhs)) / (cache.norm("f", k, 0) * cache.norm("u", l, 0)))
        return best
    if cond == "3":
        return max(norm0(cp.hole, u - restrict_J(cp, extend_zero_Jprime(cp, u))) / cache.norm("u", l, 1)
                   for l, u in enumerate(ts.u))
    if cond == "4":
        rf = max(norm0(cp.hole, restrict_J(cp, f)) / cache.norm("f", k, 0) for k, f in enumerate(ts.f))
        ru = max(norm0(cp.omega, extend_zero_Jprime(cp, u)) / cache.norm("u", l, 0)
                 for l, u in enumerate(ts.u))
        return max(rf, ru)
    if cond == "5'":
        return max(norm0(cp.omega, f - extend_zero_Jprime(cp, restrict_J(cp, f))) / cache.norm("f", k, 1)
                   for k, f in enumerate(ts.f))
    if cond == "6":
        j1p = cache.j1p()
        return max(norm0(cp.omega, extend_zero_Jprime(cp, u) - j1p[l]) / cache.norm("u", l, 1)
                   for l, u in enumerate(ts.u))
    if cond == "7":
        j1p = cache.j1p()
        Ko, Kh = cp.omega.K, cp.hole.K
        Fo = np.column_stack(ts.f)
        Jf = Fo[cp.node_map]
        A1 = Fo.conj().T @ (Ko @ np.column_stack(j1p))  # a(f, J1' u)
        A2 = Jf.conj().T @ (Kh @ np.column_stack(ts.u))  # a'(J1 f, u)
        nf = np.array([cache.norm("f", k, 2) for k in range(len(ts.f))])
        nu = np.array([cache.norm("u", l, 1) for l in range(len(ts.u))])
        return float(np.max(np.abs(A1 - A2) / np.outer(nf, nu)))
    raise InvalidSpecError(f"unknown closeness condition {cond!r}", field="condition")


def estimate_delta(cp: CouplingPair, condition: str, test_set: TestSet) -> float:
    """Empirical ``delta`` for one condition (``'1'``, ..., ``"5'"``, ..., ``'7'``).

    For condition 4 the value returned is the larger of the two norm ratios,
    which must stay at or below 2.
    """
    if not test_set.f or not test_set.u:
        raise DegenerateInputError("empty test set")
    return _estimate(_Cache(cp, test_set), str(condition))


def closeness_report(cp: CouplingPair, test_set: TestSet,
                     conditions=CONDITIONS) -> ClosenessReport:
    if not test_set.f or not test_set.u:
        raise DegenerateInputError("empty test set")
    cache = _Cache(cp, test_set)
    delta = {c: _estimate(cache, c) for c in conditions}
    return ClosenessReport(delta=delta, eps=cp.eps, h=cp.parent_mesh.h,
                           test_set=test_set.description, radii=list(cache.radii))
