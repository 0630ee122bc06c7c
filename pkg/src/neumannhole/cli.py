"""Command-line entry point.

Exit codes: 0 on success, 1 for invalid input (bad config, bad arguments,
missing files), 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import lemmas as lem
from .assembly import assemble
from .coupling import CONDITIONS, CouplingPair, closeness_report, default_test_set
from .eigen import solve_lowest
from .errors import ConfigError, NumericalError, ValidationError
from .experiments import SweepConfig, run_sweep, split_ring_study
from .geometry import (DOMAIN_KINDS, HOLE_KINDS, DomainSpec, HoleSpec, build_domain, build_hole,
                       check_property_star, triangulate, write_mesh)
from .plotting import plot_sweep
from .potential import from_config as potential_from_config

log = logging.getLogger("neumannhole")

SUBCOMMANDS = ("mesh", "solve", "sweep", "closeness", "lemmas", "property-star", "split-ring")

_TOP_KEYS = {"name", "domain", "hole", "epsilons", "field", "h", "m", "tol", "eta", "seed",
             "closeness", "record_runtime", "threads", "property_star"}
_DOMAIN_KEYS = {"kind", "corners", "center", "radius", "segments"}
_HOLE_KEYS = {"kind", "center", "gap", "segments", "vertices"}
_FIELD_KEYS = {"type", "b0", "gauge"}
_GAUGE_KEYS = {"chi", "amplitude"}
_CLOSENESS_KEYS = {"enabled", "n_eig", "n_bumps"}
_PSTAR_KEYS = {"grid_n"}


def _strict(obj, allowed: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where or 'config'}: expected an object", field=where or "<root>")
    for key in obj:
        if key not in allowed:
            path = f"{where}.{key}" if where else key
            raise ConfigError(f"unknown key {path!r}", field=path)
    return obj


def _num(obj: dict, key: str, where: str, default=None, kind=float):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number".lstrip("."), field=f"{where}.{key}".lstrip("."))
    if kind is int and int(v) != v:
        raise ConfigError(f"{where}.{key}: expected an integer".lstrip("."), field=f"{where}.{key}".lstrip("."))
    return kind(v)


def _pair(v, field: str) -> tuple[float, float]:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{field}: expected [x, y]", field=field)
    return float(v[0]), float(v[1])


def parse_config(raw: dict) -> tuple[SweepConfig, dict]:
    """Validate a config mapping; returns the sweep config and the extra settings."""
    _strict(raw, _TOP_KEYS, "")
    for required in ("domain", "hole", "epsilons"):
        if required not in raw:
            raise ConfigError(f"missing required key {required!r}", field=required)

    d = _strict(raw["domain"], _DOMAIN_KEYS, "domain")
    kind = d.get("kind", "rectangle")
    if kind not in DOMAIN_KINDS:
        raise ConfigError(f"domain.kind: unknown kind {kind!r}", field="domain.kind")
    if kind == "rectangle":
        c = d.get("corners", [0.0, 0.0, 1.0, 1.0])
        if not (isinstance(c, list) and len(c) == 4):
            raise ConfigError("domain.corners: expected [x0, y0, x1, y1]", field="domain.corners")
        domain = DomainSpec.rectangle(*map(float, c))
    else:
        domain = DomainSpec.disk(_pair(d.get("center", [0.0, 0.0]), "domain.center"),
                                 _num(d, "radius", "domain", 1.0),
                                 _num(d, "segments", "domain", 64, int))

    hd = _strict(raw["hole"], _HOLE_KEYS, "hole")
    hkind = hd.get("kind", "disk")
    if hkind not in HOLE_KINDS:
        raise ConfigError(f"hole.kind: unknown kind {hkind!r}", field="hole.kind")
    verts = hd.get("vertices")
    hole = HoleSpec(kind=hkind, center=_pair(hd.get("center", [0.5, 0.5]), "hole.center"),
                    gap=_num(hd, "gap", "hole", 0.1), segments=_num(hd, "segments", "hole", 64, int),
                    vertices=None if verts is None else tuple(_pair(v, "hole.vertices") for v in verts))

    eps = raw["epsilons"]
    if not isinstance(eps, list) or not all(isinstance(e, (int, float)) and not isinstance(e, bool)
                                            for e in eps):
        raise ConfigError("epsilons: expected a list of numbers", field="epsilons")
    eps = tuple(float(e) for e in eps)
    if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
        raise ConfigError("epsilons: must be strictly decreasing", field="epsilons")

    fd = _strict(raw.get("field", {}), _FIELD_KEYS, "field")
    if fd.get("type", "uniform") != "uniform":
        raise ConfigError(f"field.type: unknown type {fd['type']!r}", field="field.type")
    if "gauge" in fd:
        _strict(fd["gauge"], _GAUGE_KEYS, "field.gauge")
    potential = potential_from_config(fd)

    eta = raw.get("eta", "auto")
    if eta == "auto" or eta is None:
        eta = None
    elif isinstance(eta, bool) or not isinstance(eta, (int, float)):
        raise ConfigError('eta: expected a number or "auto"', field="eta")
    cl = _strict(raw.get("closeness", {}), _CLOSENESS_KEYS, "closeness")
    ps = _strict(raw.get("property_star", {}), _PSTAR_KEYS, "property_star")
    h = raw.get("h")
    if h is not None:
        h = _num(raw, "h", "")
    name = raw.get("name", "sweep")
    if not isinstance(name, str) or not name or "/" in name:
        raise ConfigError("name: expected a plain nonempty string", field="name")
    record = raw.get("record_runtime", False)
    if not isinstance(record, bool):
        raise ConfigError("record_runtime: expected true or false", field="record_runtime")
    enabled = cl.get("enabled", True)
    if not isinstance(enabled, bool):
        raise ConfigError("closeness.enabled: expected true or false", field="closeness.enabled")

    cfg = SweepConfig(domain=domain, hole=hole.with_eps(max(eps) if eps else 0.1), epsilons=eps,
                      potential=potential, h=h, m=_num(raw, "m", "", 6, int),
                      tol=_num(raw, "tol", "", 1e-8), eta=None if eta is None else float(eta),
                      seed=_num(raw, "seed", "", 0, int), n_test_eig=_num(cl, "n_eig", "closeness", 8, int),
                      n_bumps=_num(cl, "n_bumps", "closeness", 8, int), compute_delta=enabled,
                      record_runtime=record, threads=_num(raw, "threads", "", 1, int), name=name)
    try:
        cfg.validate()
    except ValidationError as exc:
        raise ConfigError(str(exc), field=exc.field) from exc
    extra = {"grid_n": _num(ps, "grid_n", "property_star", 64, int)}
    return cfg, extra


def load_config(path) -> SweepConfig:
    """Read and validate a JSON sweep config; defaults ``h = eps_min/8``, ``m = 6``, ``tol = 1e-8``."""
    return _load(path)[0]


def _load(path) -> tuple[SweepConfig, dict]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {str(path)!r}: {exc.strerror}", field="config") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})", field="config") from exc
    return parse_config(raw)


# ---------------------------------------------------------------------------
# subcommands


def _write_rows(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def _positive_eps(cfg: SweepConfig) -> list[float]:
    return [e for e in cfg.epsilons if e > 0]


def cmd_mesh(cfg, extra, out: Path, threads: int) -> list[Path]:
    parent = triangulate(cfg.domain, None, cfg.mesh_h)
    paths = [out / "omega.mesh"]
    write_mesh(parent, paths[0])
    for e in _positive_eps(cfg):
        child = triangulate(cfg.domain, cfg.hole.with_eps(e), cfg.mesh_h, parent=parent)
        p = out / f"hole_eps{e:g}.mesh"
        write_mesh(child, p)
        paths.append(p)
        print(f"eps={e:g}: {child.n_nodes} nodes, {child.n_triangles} triangles")
    print(f"omega: {parent.n_nodes} nodes, {parent.n_triangles} triangles")
    return paths


def cmd_solve(cfg, extra, out: Path, threads: int) -> list[Path]:
    parent = triangulate(cfg.domain, None, cfg.mesh_h)
    omega = solve_lowest(assemble(parent, cfg.potential), cfg.m, tol=cfg.tol)
    rows = [("omega", 0.0, k + 1, lam, res)
            for k, (lam, res) in enumerate(zip(omega.eigenvalues, omega.residuals))]
    for e in _positive_eps(cfg):
        child = triangulate(cfg.domain, cfg.hole.with_eps(e), cfg.mesh_h, parent=parent)
        sol = solve_lowest(assemble(child, cfg.potential), cfg.m, tol=cfg.tol)
        rows += [("hole", e, k + 1, lam, res)
                 for k, (lam, res) in enumerate(zip(sol.eigenvalues, sol.residuals))]
    p = _write_rows(out / f"{cfg.name}_eigenvalues.csv",
                    ("domain", "epsilon", "k", "lambda", "residual"), rows)
    return [p]


def cmd_sweep(cfg, extra, out: Path, threads: int) -> list[Path]:
    result = run_sweep(cfg, threads)
    csv_path = result.write_csv(out / f"{cfg.name}.csv")
    summary = out / f"{cfg.name}_summary.txt"
    summary.write_text("\n".join(result.summary_lines()) + "\n", encoding="utf-8")
    for line in result.summary_lines():
        print(line)
    return [csv_path, summary, *plot_sweep(result, out)]


def cmd_closeness(cfg, extra, out: Path, threads: int) -> list[Path]:
    parent = triangulate(cfg.domain, None, cfg.mesh_h)
    fo = assemble(parent, cfg.potential)
    n = max(cfg.n_test_eig, 1)
    omega = solve_lowest(fo, n, tol=cfg.tol)
    rows = []
    for e in _positive_eps(cfg):
        spec = cfg.hole.with_eps(e)
        child = triangulate(cfg.domain, spec, cfg.mesh_h, parent=parent)
        fh = assemble(child, cfg.potential)
        sol = solve_lowest(fh, n, tol=cfg.tol)
        cp = CouplingPair(fo, fh, spec.center, e)
        ts = default_test_set(cp, omega, sol, cfg.n_test_eig, cfg.n_bumps, cfg.seed)
        rep = closeness_report(cp, ts)
        rows += [(e, cfg.mesh_h, c, rep.delta[c], cfg.seed) for c in CONDITIONS]
        print(f"eps={e:g}: " + " ".join(f"d{c}={rep.delta[c]:.3e}" for c in CONDITIONS))
    p = _write_rows(out / f"{cfg.name}_closeness.csv",
                    ("epsilon", "h", "condition", "delta", "seed"), rows)
    return [p]


def cmd_lemmas(cfg, extra, out: Path, threads: int) -> list[Path]:
    rng = np.random.default_rng(cfg.seed)
    h = cfg.mesh_h
    parent = triangulate(cfg.domain, None, h)
    fo = assemble(parent, cfg.potential)
    omega = solve_lowest(fo, cfg.m, tol=cfg.tol)
    reports = []

    def rand(n):
        return rng.normal(size=(n, 100)) + 1j * rng.normal(size=(n, 100))

    reports.append(lem.verify_delta_inequality(fo, rand(fo.n)))
    reports.append(lem.verify_comp_bound(fo, cfg.potential, omega.eigenvectors))
    ball_cases, trace_cases = [], []
    poly = build_domain(cfg.domain)
    line_reports = []
    for e in _positive_eps(cfg):
        spec = cfg.hole.with_eps(e)
        child = triangulate(cfg.domain, spec, h, parent=parent)
        fh = assemble(child, cfg.potential)
        sol = solve_lowest(fh, cfg.m, tol=cfg.tol)
        d = lem.verify_delta_inequality(fh, rand(fh.n))
        d.lemma = f"delta(eps={e:g})"
        reports.append(d)
        cp = CouplingPair(fo, fh, spec.center, e)
        ball_cases.append((cp, omega.eigenvectors, sol.eigenvectors))
        trace_cases.append((cp, sol.eigenvectors))
        pts = _line_points(spec, poly)
        try:
            r = lem.verify_line_bound(child, poly, build_hole(spec), pts, sol.eigenvectors[:, 0])
            r.lemma = f"line-C8(eps={e:g})"
            line_reports.append(r)
        except NumericalError as exc:
            print(f"line bound at eps={e:g}: {exc}")
    reports += list(lem.verify_ball_bounds(ball_cases).values())
    reports.append(lem.verify_trace_bound(trace_cases))
    reports += line_reports
    reports.append(_marchenko(cfg, fo, omega))
    rows = [tuple(r.values()) for rep in reports for r in rep.rows()]
    csv_path = _write_rows(out / f"{cfg.name}_lemmas.csv",
                           ("lemma", "sample", "lhs", "rhs", "implied", "constant", "passed"), rows)
    text = out / f"{cfg.name}_lemmas.txt"
    lines = [rep.summary() for rep in reports] + [f"seed: {cfg.seed}"]
    text.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return [csv_path, text]


def _line_points(spec: HoleSpec, poly: np.ndarray) -> np.ndarray:
    """A few probe points around the hole at distance 1.5 eps."""
    phi = np.pi / 4 * np.arange(8)
    c = np.asarray(spec.center)
    return c + 1.5 * spec.eps * np.stack([np.cos(phi), np.sin(phi)], axis=1)


def _marchenko(cfg: SweepConfig, fo, omega):
    c = np.asarray(cfg.hole.center)
    r0 = max(_positive_eps(cfg))
    cases = []
    for level, fp in enumerate([fo, None]):
        if fp is None:
            mesh = triangulate(cfg.domain, None, cfg.mesh_h / 2)
            fp = assemble(mesh, cfg.potential)
            vecs = solve_lowest(fp, min(cfg.m, 4), tol=cfg.tol).eigenvectors
        else:
            vecs = omega.eigenvectors[:, :min(cfg.m, 4)]
        cen = fp.mesh.centroids() - c
        r = np.hypot(cen[:, 0], cen[:, 1])
        cases.append((fp, r < r0, (r >= r0) & (r < 2 * r0), vecs))
    return lem.verify_marchenko(cases)


def cmd_property_star(cfg, extra, out: Path, threads: int) -> list[Path]:
    lines = []
    for e in _positive_eps(cfg):
        rep = check_property_star(cfg.domain, cfg.hole.with_eps(e), grid_n=extra["grid_n"])
        if rep.compliant:
            lines.append(f"eps={e:g}: compliant ({rep.samples_tested} samples, grid_n={rep.grid_n})")
        else:
            hits = ",".join(k for k, v in rep.witness_hits.items() if v)
            lines.append(f"eps={e:g}: NOT compliant, witness=({rep.witness[0]!r}, {rep.witness[1]!r}) "
                         f"blocked={hits} ({rep.samples_tested} samples, grid_n={rep.grid_n})")
    p = out / f"{cfg.name}_property_star.txt"
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return [p]


def cmd_split_ring(cfg, extra, out: Path, threads: int) -> list[Path]:
    rep = split_ring_study(cfg, threads)
    ring_csv = rep.ring.write_csv(out / f"{cfg.name}_ring.csv")
    disk_csv = rep.disk.write_csv(out / f"{cfg.name}_disk.csv")
    p = out / f"{cfg.name}_split_ring.txt"
    p.write_text("\n".join(rep.lines()) + "\n", encoding="utf-8")
    print("\n".join(rep.lines()))
    return [ring_csv, disk_csv, p, *plot_sweep(rep.ring, out)]


_COMMANDS = {
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "closeness": cmd_closeness,
    "lemmas": cmd_lemmas,
    "property-star": cmd_property_star,
    "split-ring": cmd_split_ring,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neumannhole", description="Magnetic Neumann spectra on domains with small holes.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}",
                                parser_class=_Parser)
    sub.required = True
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("-v", "--verbose", action="count", default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for per-eps solves (output does not depend on it)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, extra = _load(args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1", field="threads")
            cfg = replace(cfg, threads=args.threads)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        paths = _COMMANDS[args.command](cfg, extra, out, cfg.threads)
    except ValidationError as exc:
        print(f"error: {exc}" + (f" [field: {exc.field}]" if exc.field else ""), file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        log.info("wrote %s", p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
