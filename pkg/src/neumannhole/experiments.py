"""Epsilon sweeps, rate fits and the split-ring contrast study."""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .assembly import FormPair, assemble
from .coupling import ClosenessReport, CouplingPair, closeness_report, default_test_set
from .eigen import SpectralResult, solve_lowest
from .errors import InvalidSpecError, LogDomainError, NeumannHoleError
from .geometry import DomainSpec, HoleSpec, Mesh, build_domain, check_hole_fits, triangulate
from .potential import PotentialModel
from .spectra import MatchReport, SpectrumSet, dbar, match_eigenvalues

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epsilon", "h", "k", "lambda_omega", "lambda_hole", "dbar", "dbar_trunc_err",
               "delta5p", "delta6", "delta7", "pollution_count", "runtime_ms")
FLOOR_FACTOR = 3.0


@dataclass(frozen=True)
class SweepConfig:
    domain: DomainSpec
    hole: HoleSpec
    epsilons: tuple[float, ...]
    potential: PotentialModel = PotentialModel()
    h: float | None = None
    m: int = 6
    tol: float = 1e-8
    eta: float | None = None  # None: FLOOR_FACTOR x mesh floor
    seed: int = 0
    n_test_eig: int = 8
    n_bumps: int = 8
    compute_delta: bool = True
    record_runtime: bool = False
    threads: int = 1
    name: str = "sweep"

    @property
    def mesh_h(self) -> float:
        positive = [e for e in self.epsilons if e > 0]
        return self.h if self.h is not None else min(positive) / 8.0

    def validate(self) -> None:
        eps = list(self.epsilons)
        if not eps:
            raise InvalidSpecError("epsilons: empty list", field="epsilons")
        if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
            raise InvalidSpecError("epsilons: must be strictly decreasing", field="epsilons")
        if eps[-1] < 0:
            raise InvalidSpecError("epsilons: values must be nonnegative", field="epsilons")
        if not any(e > 0 for e in eps):
            raise InvalidSpecError("epsilons: need at least one positive value", field="epsilons")
        if self.m < 1:
            raise InvalidSpecError("m must be at least 1", field="m")
        if self.threads < 1:
            raise InvalidSpecError("threads must be at least 1", field="threads")
        if self.eta is not None and not self.eta > 0:
            raise InvalidSpecError("eta must be positive", field="eta")
        poly = build_domain(self.domain)
        for e in eps:
            if e > 0:
                check_hole_fits(poly, self.hole.with_eps(e), factor=2.0)
        eps_min = min(e for e in eps if e > 0)
        if self.mesh_h > eps_min / 4.0 * (1 + 1e-12):
            raise InvalidSpecError(f"h={self.mesh_h:g} does not resolve eps_min={eps_min:g} "
                                   "(need h <= eps_min/4)", field="h")


@dataclass
class MeshFloor:
    """A=0 eigenvalue error against the separable rectangle oracle, at the sweep's ``h``."""

    lam: float
    dbar: float
    computed: tuple[float, ...]
    exact: tuple[float, ...]


@dataclass
class EpsRun:
    eps: float
    spectrum: SpectralResult
    dbar: float
    trunc: float
    match: MatchReport
    closeness: ClosenessReport | None
    runtime_ms: float


class RateFit(NamedTuple):
    C: float
    p: float
    residual: float


@dataclass
class SweepResult:
    config: SweepConfig
    h: float
    omega: SpectralResult
    runs: list[EpsRun]
    floor: MeshFloor | None
    eta: float
    fits: dict[str, RateFit | None] = field(default_factory=dict)

    @property
    def epsilons(self) -> list[float]:
        return [r.eps for r in self.runs]

    def series(self, key: str) -> list[float]:
        if key == "dbar":
            return [r.dbar for r in self.runs]
        if key == "pollution":
            return [r.match.pollution_count for r in self.runs]
        return [np.nan if r.closeness is None else r.closeness.delta[key] for r in self.runs]

    def gaps(self, k: int) -> list[float]:
        """``|lambda_k(Omega) - lambda_k(Omega minus K)|`` per eps, ``k`` one-based."""
        lo = self.omega.eigenvalues[k - 1]
        return [abs(r.spectrum.eigenvalues[k - 1] - lo) for r in self.runs]

    def rows(self) -> list[tuple]:
        m = self.config.m
        out = []
        for r in self.runs:
            d = r.closeness.delta if r.closeness is not None else {}
            rt = r.runtime_ms if self.config.record_runtime else ""
            for k in range(m):
                out.append((r.eps, self.h, k + 1, self.omega.eigenvalues[k], r.spectrum.eigenvalues[k],
                            r.dbar, r.trunc, d.get("5'", np.nan), d.get("6", np.nan), d.get("7", np.nan),
                            r.match.pollution_count, rt))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path

    def summary_lines(self) -> list[str]:
        lines = [f"name: {self.config.name}", f"h: {self.h!r}", f"m: {self.config.m}",
                 f"seed: {self.config.seed}", f"eta: {self.eta!r}"]
        if self.floor is not None:
            lines.append(f"mesh_floor_lambda: {self.floor.lam!r}")
            lines.append(f"mesh_floor_dbar: {self.floor.dbar!r}")
        for key, fit in self.fits.items():
            if fit is None:
                lines.append(f"fit {key}: insufficient data")
            else:
                lines.append(f"fit {key}: C={fit.C!r} p={fit.p!r} residual={fit.residual!r}")
        lines.append("delta estimates are maxima over a finite test set (lower bounds)")
        return lines


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def fit_rate(pairs) -> RateFit:
    """Least-squares fit of ``value = C eps^p`` in log-log coordinates."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise InvalidSpecError(f"fit_rate: need at least 3 points, got {len(pairs)}")
    x = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise LogDomainError("fit_rate: all epsilons and values must be positive")
    lx, ly = np.log(x), np.log(y)
    A = np.stack([np.ones_like(lx), lx], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return RateFit(float(np.exp(coef[0])), float(coef[1]), resid)


def rectangle_eigenvalues(domain: DomainSpec, count: int) -> np.ndarray:
    """Lowest Neumann eigenvalues of the Laplacian on a rectangle (separation of variables)."""
    if domain.kind != "rectangle":
        raise InvalidSpecError("analytic oracle only for rectangles", field="domain.kind")
    x0, y0, x1, y1 = domain.corners
    a, b = x1 - x0, y1 - y0
    n = int(np.ceil(np.sqrt(count))) + 2
    jj, kk = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    vals = np.sort((np.pi ** 2 * ((jj / a) ** 2 + (kk / b) ** 2)).ravel())
    return vals[:count]


def mesh_floor(domain: DomainSpec, h: float, count: int, tol: float = 1e-8,
               parent: Mesh | None = None) -> MeshFloor | None:
    """Observed discretization error of the A=0 problem at ``h``; ``None`` off rectangles."""
    if domain.kind != "rectangle":
        return None
    mesh = parent if parent is not None else triangulate(domain, None, h)
    sol = solve_lowest(assemble(mesh, PotentialModel()), count, tol=tol)
    exact = rectangle_eigenvalues(domain, count)
    lam = float(np.max(np.abs(sol.eigenvalues - exact)))
    d = float(np.max(np.abs(1 / (sol.eigenvalues + 1) - 1 / (exact + 1))))
    return MeshFloor(lam, d, tuple(map(float, sol.eigenvalues)), tuple(map(float, exact)))


def _n_solve(cfg: SweepConfig) -> int:
    return max(cfg.m + 1, cfg.n_test_eig if cfg.compute_delta else 0)


def _run_eps(cfg: SweepConfig, parent: Mesh, fo: FormPair, omega: SpectralResult, eps: float,
             eta: float) -> EpsRun:
    t0 = time.perf_counter()
    try:
        if eps > 0:
            spec = cfg.hole.with_eps(eps)
        else:
            spec = replace(cfg.hole, kind="none", eps=0.0)
        child = triangulate(cfg.domain, spec, parent.h, parent=parent)
        fh = assemble(child, cfg.potential)
        sol = solve_lowest(fh, _n_solve(cfg), tol=cfg.tol)
        m = cfg.m
        so = SpectrumSet.from_eigenvalues(omega.eigenvalues[:m], omega.eigenvalues[m])
        sh = SpectrumSet.from_eigenvalues(sol.eigenvalues[:m], sol.eigenvalues[m])
        d, trunc = dbar(so, sh)
        cutoff = min(omega.eigenvalues[m - 1], sol.eigenvalues[m - 1])
        match = match_eigenvalues(omega.eigenvalues[:m], sol.eigenvalues[:m], eta, cutoff=cutoff)
        report = None
        if cfg.compute_delta:
            cp = CouplingPair(fo, fh, spec.center, eps)
            ts = default_test_set(cp, omega, sol, n_eig=cfg.n_test_eig, n_bumps=cfg.n_bumps,
                                  seed=cfg.seed)
            report = closeness_report(cp, ts)
    except NeumannHoleError as exc:
        exc.args = (f"eps={eps:g}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
    ms = 1e3 * (time.perf_counter() - t0)
    log.info("eps=%g dbar=%.3e pollution=%d (%.0f ms)", eps, d, match.pollution_count, ms)
    return EpsRun(eps, sol, d, trunc, match, report, ms)


def run_sweep(cfg: SweepConfig, threads: int | None = None) -> SweepResult:
    """Solve the full domain once and each perforated domain on the same background grid."""
    cfg.validate()
    threads = threads or cfg.threads
    h = cfg.mesh_h
    parent = triangulate(cfg.domain, None, h)
    fo = assemble(parent, cfg.potential)
    omega = solve_lowest(fo, _n_solve(cfg), tol=cfg.tol)
    floor = mesh_floor(cfg.domain, h, cfg.m + 1, tol=cfg.tol, parent=parent)
    if cfg.eta is not None:
        eta = float(cfg.eta)
    elif floor is not None:
        eta = FLOOR_FACTOR * floor.lam
    else:
        raise InvalidSpecError("eta: no analytic mesh floor for this domain; set eta explicitly",
                               field="eta")

    def work(e):
        return _run_eps(cfg, parent, fo, omega, e, eta)

    if threads == 1:
        runs = [work(e) for e in cfg.epsilons]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(work, cfg.epsilons))
    result = SweepResult(cfg, h, omega, runs, floor, eta)
    result.fits = fit_all(result)
    return result


def fit_all(result: SweepResult) -> dict[str, RateFit | None]:
    """Rate fits for dbar (above 3x the floor only) and each delta estimate."""
    fits: dict[str, RateFit | None] = {}
    floor_d = FLOOR_FACTOR * result.floor.dbar if result.floor is not None else 0.0
    eps = result.epsilons
    pairs = [(e, v) for e, v in zip(eps, result.series("dbar")) if e > 0 and v > floor_d]
    fits["dbar"] = fit_rate(pairs) if len(pairs) >= 3 else None
    if result.config.compute_delta:
        for key in ("5'", "6", "7"):
            pairs = [(e, v) for e, v in zip(eps, result.series(key)) if e > 0 and v > 0]
            fits[key] = fit_rate(pairs) if len(pairs) >= 3 else None
    return fits


@dataclass
class SplitRingReport:
    ring: SweepResult
    disk: SweepResult
    eta: float

    def flags(self) -> list[tuple[float, int, int]]:
        """``(eps, ring pollution, disk pollution)`` per eps."""
        return [(a.eps, a.match.pollution_count, b.match.pollution_count)
                for a, b in zip(self.ring.runs, self.disk.runs)]

    @property
    def contrast(self) -> bool:
        """Some eps where the ring is flagged and the disk control is clean."""
        return any(r >= 1 and d == 0 for _, r, d in self.flags())

    def unpaired_values(self) -> list[tuple[float, list[float]]]:
        return [(run.eps, [float(run.spectrum.eigenvalues[j]) for j in run.match.unpaired_b])
                for run in self.ring.runs]

    def count_contrast(self) -> list[tuple[float, int, int, float]]:
        """``(eps, ring count, disk count, window)``: eigenvalues below the window edge.

        The window edge is the midpoint between the first and second distinct
        full-domain levels above the bottom; a ring with an extra eigenvalue
        there shows a surplus that the disk control lacks.
        """
        lam = self.ring.omega.eigenvalues
        edge = 0.5 * (lam[1] + lam[3]) if len(lam) > 3 else float(lam[-1])
        out = []
        for a, b in zip(self.ring.runs, self.disk.runs):
            out.append((a.eps, int(np.sum(a.spectrum.eigenvalues < edge)),
                        int(np.sum(b.spectrum.eigenvalues < edge)), float(edge)))
        return out

    def lines(self) -> list[str]:
        out = [f"eta: {self.eta!r}"]
        for (eps, r, d), (_, vals) in zip(self.flags(), self.unpaired_values()):
            out.append(f"eps={eps!r} ring_unpaired={r} disk_unpaired={d} ring_values={vals}")
        out.append(f"contrast: {'yes' if self.contrast else 'no'}")
        return out


def split_ring_study(cfg: SweepConfig, threads: int | None = None) -> SplitRingReport:
    """Run the split-ring sweep and a disk companion at the same eps, h and eta."""
    if cfg.hole.kind != "split-ring":
        raise InvalidSpecError("split_ring_study needs a split-ring hole", field="hole.kind")
    disk_cfg = replace(cfg, hole=replace(cfg.hole, kind="disk"), name=cfg.name + "-disk")
    disk = run_sweep(disk_cfg, threads)
    ring = run_sweep(replace(cfg, eta=disk.eta), threads)
    return SplitRingReport(ring, disk, disk.eta)
