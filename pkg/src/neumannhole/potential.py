"""Closed-form magnetic vector potentials and gauge shifts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CatalogError, GeometryError
from .geometry import points_in_polygon

# gauge functions chi and their gradients
GAUGES = {
    "xy": (lambda x, y: x * y, lambda x, y: (y, x)),
    "x2": (lambda x, y: x * x, lambda x, y: (2.0 * x, np.zeros_like(x))),
    "sin(x)cos(y)": (
        lambda x, y: np.sin(x) * np.cos(y),
        lambda x, y: (np.cos(x) * np.cos(y), -np.sin(x) * np.sin(y)),
    ),
}
_ALIASES = {"x^2": "x2", "x**2": "x2", "sinxcosy": "sin(x)cos(y)"}


def _canonical(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in GAUGES:
        raise CatalogError(f"unknown gauge function {name!r}; known: {sorted(GAUGES)}",
                           field="field.gauge.chi")
    return name


@dataclass(frozen=True)
class PotentialModel:
    """Symmetric-gauge uniform field ``b0`` plus ``sum(amplitude * grad chi)``."""

    b0: float = 0.0
    gauges: tuple[tuple[str, float], ...] = ()

    @classmethod
    def uniform(cls, b0: float) -> PotentialModel:
        return cls(b0=float(b0))

    @property
    def is_zero(self) -> bool:
        return self.b0 == 0.0 and all(a == 0.0 for _, a in self.gauges)


def eval_potential(model: PotentialModel, x, y):
    """Return ``(Ax, Ay)``; vectorized over ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax = -0.5 * model.b0 * y
    ay = 0.5 * model.b0 * x
    for name, amp in model.gauges:
        if amp == 0.0:
            continue
        gx, gy = GAUGES[name][1](x, y)
        ax = ax + amp * gx
        ay = ay + amp * gy
    return ax, ay


def gauge_shift(model: PotentialModel, chi: str, amplitude: float) -> PotentialModel:
    chi = _canonical(chi)
    if amplitude == 0.0:
        return model
    return PotentialModel(b0=model.b0, gauges=model.gauges + ((chi, float(amplitude)),))


def numeric_curl(model: PotentialModel, x: float, y: float, step: float = 1e-3,
                 domain_poly: np.ndarray | None = None) -> float:
    """Central-difference estimate of ``dAy/dx - dAx/dy``."""
    if domain_poly is not None:
        stencil = np.array([[x + step, y], [x - step, y], [x, y + step], [x, y - step]])
        if not points_in_polygon(stencil, domain_poly).all():
            raise GeometryError(f"curl stencil around ({x:g}, {y:g}) leaves the domain")
    _, ay_p = eval_potential(model, x + step, y)
    _, ay_m = eval_potential(model, x - step, y)
    ax_p, _ = eval_potential(model, x, y + step)
    ax_m, _ = eval_potential(model, x, y - step)
    return float((ay_p - ay_m) / (2 * step) - (ax_p - ax_m) / (2 * step))


def sup_norm(model: PotentialModel, points: np.ndarray) -> float:
    """``max |A|`` over the sample points, a lower bound on the sup-norm."""
    pts = np.atleast_2d(points)
    ax, ay = eval_potential(model, pts[:, 0], pts[:, 1])
    return float(np.sqrt(np.max(ax * ax + ay * ay))) if len(pts) else 0.0


def mesh_sup_norm(model: PotentialModel, mesh) -> float:
    """Sup-norm sampled at mesh nodes and the mid-edge quadrature points."""
    tri = mesh.nodes[mesh.triangles]
    mids = 0.5 * (tri + np.roll(tri, -1, axis=1))
    return sup_norm(model, np.concatenate([mesh.nodes, mids.reshape(-1, 2)]))


def from_config(cfg: dict | None) -> PotentialModel:
    """Build a model from ``{"type": "uniform", "b0": .., "gauge": {"chi": .., "amplitude": ..}}``."""
    if not cfg:
        return PotentialModel()
    model = PotentialModel.uniform(cfg.get("b0", 0.0))
    g = cfg.get("gauge")
    if g:
        model = gauge_shift(model, g["chi"], g.get("amplitude", 1.0))
    return model
