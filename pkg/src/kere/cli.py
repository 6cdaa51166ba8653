"""Command-line front end: load a map, run one job, write deterministic reports.

    kere --command classify --map '{"kind": "mobius", "params": {"a": 2, "b": 0, "c": 0, "d": 1}}'
    kere --command gallery --out results --format json,csv
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .classifier import Budget, ClassificationResult, classify
from .conjugacy_builder import (ConjugacyMap, elliptic_conjugacy, klein_normalization,
                                reversing_normalization, torus_translation_conjugacy)
from .errors import ConfigError, KereError
from .metric_space import Surface
from .orbit_analysis import fixed_points, orbit_array, singular_set, surface_grid
from .render import Figure, chart_coords, to_png, to_svg
from .rotation_invariants import translation_vector
from .surface_maps import SurfaceMap, homology_matrix_of, map_from_dict

COMMANDS = ("analyze", "classify", "conjugate", "render", "gallery")
FORMATS = ("json", "csv", "png", "svg")
SIG_DIGITS = 12

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG = 0, 1, 2

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class JobConfig:
    command: str
    map_source: Optional[str] = None
    horizon: Optional[int] = None
    grid: Optional[int] = None
    eps: Optional[float] = None
    threshold: Optional[float] = None
    seed: int = 0
    out: Optional[str] = None
    formats: tuple = ("json",)

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        for name in ("horizon", "grid", "eps", "threshold"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"--{name} must be positive")
        if self.seed < 0:
            raise ConfigError("--seed must be non-negative")
        bad = set(self.formats) - set(FORMATS)
        if bad or not self.formats:
            raise ConfigError(f"formats must be a non-empty subset of {FORMATS}")
        if self.command != "gallery" and self.map_source is None:
            raise ConfigError(f"{self.command} needs --map")
        if set(self.formats) - {"json"} and self.out is None:
            raise ConfigError("csv/png/svg output needs --out")
        threads = os.environ.get("KERE_THREADS")
        if threads is not None:
            try:
                ok = int(threads) >= 1
            except ValueError:
                ok = False
            if not ok:
                raise ConfigError("KERE_THREADS must be a positive integer")

    def budget(self) -> Budget:
        b = Budget(seed=self.seed)
        for name in ("horizon", "grid", "eps", "threshold"):
            v = getattr(self, name)
            if v is not None:
                setattr(b, name, v)
        return b


# ---------------------------------------------------------------------------
# deterministic JSON


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = format(x, f".{SIG_DIGITS}g")
    return "0" if s == "-0" else s


def normalize(obj):
    """Floats become fixed-precision decimal strings; numpy types become plain JSON."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, complex):
        return [fmt(obj.real), fmt(obj.imag)]
    if isinstance(obj, Surface):
        return obj.value
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc: dict) -> str:
    return json.dumps(normalize(doc), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# inputs


def load_map(source: str) -> SurfaceMap:
    text = source.strip()
    if not text.startswith("{"):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"map file {source!r} not found")
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"map document is not valid JSON: {exc}") from exc
    return map_from_dict(doc)


def parse_args(argv) -> JobConfig:
    p = argparse.ArgumentParser(prog="kere", description=__doc__.splitlines()[0])
    p.add_argument("--command", default="classify", choices=COMMANDS)
    p.add_argument("--map", dest="map_source", help="JSON map document or path to one")
    p.add_argument("--horizon", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", default="json", help="comma-separated subset of json,csv,png,svg")
    p.add_argument("--version", action="version", version=f"kere {__version__}")
    a = p.parse_args(argv)
    formats = tuple(dict.fromkeys(x.strip() for x in a.format.split(",") if x.strip()))
    cfg = JobConfig(a.command, a.map_source, a.horizon, a.grid, a.eps, a.threshold, a.seed,
                    a.out, formats)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# jobs


@dataclass
class JobOutput:
    result: dict
    diagnostics: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)
    figure: Optional[Figure] = None
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    extra_json: dict = field(default_factory=dict)  # file name -> document


def _classification_dict(res: ClassificationResult) -> dict:
    d = res.to_dict()
    d["label"] = res.label
    d["status"] = "undetermined" if res.cls == "Undetermined" else "determined"
    if "singular_clusters" in res.evidence:
        d["singular_clusters"] = res.evidence["singular_clusters"]
    d["evidence"] = {k: v for k, v in d["evidence"].items() if k != "budget"}
    return d


def job_analyze(f: SurfaceMap, cfg: JobConfig) -> JobOutput:
    if f.surface is Surface.PLANE:
        raise ConfigError("analyze needs a compact surface")
    grid = cfg.grid or 64
    eps = cfg.eps or 0.1
    horizon = cfg.horizon or 500
    threshold = cfg.threshold or 0.05
    budgets = {"grid": grid, "eps": eps, "horizon": horizon, "threshold": threshold,
               "seed": cfg.seed}
    sing = singular_set(f, grid, eps, horizon, threshold, seed=cfg.seed)
    census = fixed_points(f)
    result = {"surface": f.surface, "orientation": f.orientation,
              "singular_fraction": sing.fraction, "singular_clusters": len(sing.clusters()),
              "singular_points": sing.cluster_centers(),
              "fixed_points": census.points, "fixed_point_continuum": census.continuum}
    diagnostics = {"grid_points": int(sing.grid.shape[0]), "cell": sing.cell,
                   "flagged": int(sing.flagged.sum()),
                   "fixed_point_min_displacement": census.min_displacement}
    if f.surface in (Surface.TORUS, Surface.KLEIN) and f.lift_available:
        A = homology_matrix_of(f)
        result["homology_matrix"] = A
        if np.array_equal(A, np.eye(2, dtype=int)):
            tv = translation_vector(f, (0.0, 0.0), 1000, seed=cfg.seed)
            result["translation_vector"] = tv.value
            diagnostics.update(translation_spread=tv.spread, spread_bound=tv.bound)
    fig = Figure(f"{f.kind} singular set")
    fig.add_points("singular", chart_coords(f.surface, sing.flagged_points), 1.5)
    if census.count:
        fig.add_points("fixed", chart_coords(f.surface, census.points), 3.0)
    rows = [[i, *[fmt(v) for v in p], int(sing.flagged[i])]
            for i, p in enumerate(sing.grid) if sing.flagged[i]]
    header = ["index"] + [f"x{k}" for k in range(sing.grid.shape[1])] + ["flagged"]
    return JobOutput(result, diagnostics, budgets, fig, {"singular": (header, rows)})


def job_classify(f: SurfaceMap, cfg: JobConfig) -> JobOutput:
    budget = cfg.budget()
    res = classify(f, budget)
    out = JobOutput(_classification_dict(res), {"confidence": res.confidence}, vars(budget).copy())
    pts = res.evidence.get("singular_points")
    if f.surface is not Surface.PLANE:
        fig = Figure(res.label)
        if pts:
            fig.add_points("singular", chart_coords(f.surface, np.array(pts)), 3.0)
        fp = res.evidence.get("fixed_points")
        if fp:
            fig.add_points("fixed", chart_coords(f.surface, np.array(fp)), 3.0)
        out.figure = fig
    out.tables["classification"] = (["surface", "class", "params"],
                                    [[f.surface.value, res.cls, _param_text(res.params)]])
    return out


def _param_text(params: dict) -> str:
    return json.dumps(normalize(params), sort_keys=True)


def build_conjugacy(f: SurfaceMap, res: ClassificationResult, grid: int) -> ConjugacyMap:
    if res.cls == "Elliptic":
        return elliptic_conjugacy(f, grid)
    if res.cls == "TorusTranslation":
        return torus_translation_conjugacy(f, grid)
    if res.cls in ("TorusReversingType1", "TorusReversingType2"):
        return reversing_normalization(f, 1 if res.cls.endswith("1") else 2)
    if res.cls in ("KleinPhi", "KleinPsi"):
        return klein_normalization(f)
    raise KereError(f"no conjugacy construction for class {res.cls}")


def _grid_figure(h: ConjugacyMap, title: str) -> Figure:
    fig = Figure(title)
    V = h.values.reshape(tuple(h.shape) + (-1,))
    C = chart_coords(h.surface, h.values).reshape(tuple(h.shape) + (2,))
    step = max(1, h.shape[0] // 16)
    for i in range(0, V.shape[0], step):
        fig.add_path("curve", C[i])
    step = max(1, h.shape[1] // 16)
    for j in range(0, V.shape[1], step):
        fig.add_path("grid", C[:, j])
    return fig


def job_conjugate(f: SurfaceMap, cfg: JobConfig) -> JobOutput:
    budget = cfg.budget()
    grid = cfg.grid or 64
    res = classify(f, budget)
    result = {"classification": _classification_dict(res)}
    diagnostics = {}
    out = JobOutput(result, diagnostics, {**vars(budget), "conjugacy_grid": grid})
    try:
        h = build_conjugacy(f, res, grid)
    except KereError as exc:
        result["status"] = "undetermined"
        result["conjugacy"] = None
        diagnostics["reason"] = f"{type(exc).__name__}: {exc}"
        return out
    result["status"] = "determined"
    result["conjugacy"] = {"kind": h.kind, "model": h.model.to_dict(), "shape": list(h.shape),
                           "residual": h.residual, "injective_on_grid": h.injective_on_grid()}
    diagnostics["extra"] = h.extra
    out.extra_json["conjugacy_grid.json"] = h.to_dict()
    out.figure = _grid_figure(h, f"{res.label} conjugacy grid")
    return out


def job_render(f: SurfaceMap, cfg: JobConfig) -> JobOutput:
    horizon = cfg.horizon or 500
    rng = np.random.default_rng(cfg.seed)
    if f.surface is Surface.SPHERE:
        seeds = rng.normal(size=(4, 3))
        seeds /= np.linalg.norm(seeds, axis=1, keepdims=True)
    elif f.surface is Surface.PLANE:
        seeds = rng.normal(size=(4, 2))
    else:
        grid, _ = surface_grid(f.surface, 8)
        seeds = grid[rng.choice(grid.shape[0], 4, replace=False)]
    orbits = orbit_array(f, seeds, 0, horizon)
    fig = Figure(f"{f.kind} orbits")
    flat = orbits.reshape(-1, orbits.shape[-1])
    bounds = (flat.min(axis=0), flat.max(axis=0)) if f.surface is Surface.PLANE else None
    for k in range(orbits.shape[1]):
        C = chart_coords(f.surface, orbits[:, k, :], bounds)
        fig.add_path("orbit", C)
        fig.add_points("orbit", C, 1.0)
    result = {"surface": f.surface, "orbits": int(orbits.shape[1]), "horizon": horizon,
              "seeds": seeds}
    return JobOutput(result, {}, {"horizon": horizon, "seed": cfg.seed}, fig)


# ---------------------------------------------------------------------------
# gallery


def _m(kind, surface, **params):
    return {"surface": surface, "kind": kind, "params": params}


def _c(z: complex):
    return [z.real, z.imag]


def builtin_gallery() -> list:
    """(name, map document, expected class) for every builtin normal form."""
    rot = complex(math.cos(2 * math.pi * GOLDEN), math.sin(2 * math.pi * GOLDEN))
    semi = -complex(math.cos(2 * math.pi * 0.1234), math.sin(2 * math.pi * 0.1234))
    a1, a2 = math.sqrt(2) - 1, math.sqrt(3) - 1
    return [
        ("mobius_elliptic", _m("mobius", "Sphere", a=_c(rot), b=0, c=0, d=1), "Elliptic"),
        ("mobius_parabolic", _m("mobius", "Sphere", a=1, b=1, c=0, d=1), "Parabolic"),
        ("mobius_hyperbolic", _m("mobius", "Sphere", a=2, b=0, c=0, d=1), "Hyperbolic"),
        ("mobius_periodic", _m("mobius", "Sphere", a=[0, 1], b=0, c=0, d=1), "Periodic"),
        ("reflection", _m("fractional_reflection", "Sphere", a=1, b=0, c=0, d=1), "Reflection"),
        ("semi_parabolic", _m("fractional_reflection", "Sphere", a=1, b=1, c=0, d=1),
         "SemiParabolic"),
        ("semi_hyperbolic", _m("fractional_reflection", "Sphere", a=2, b=0, c=0, d=1),
         "SemiHyperbolic"),
        ("semi_elliptic", _m("fractional_reflection", "Sphere", a=0, b=_c(semi), c=1, d=0),
         "SemiElliptic"),
        ("rotation_profile", _m("rotation_profile", "Sphere"), "NotRegular"),
        ("torus_translation", _m("torus_translation", "Torus", alpha=a1, beta=a2),
         "TorusTranslation"),
        ("torus_reversing_type1", _m("torus_reversing_type1", "Torus", alpha=a1),
         "TorusReversingType1"),
        ("torus_reversing_type2", _m("torus_reversing_type2", "Torus", alpha=a2 / 4),
         "TorusReversingType2"),
        ("torus_periodic", _m("torus_affine", "Torus", matrix=[[0, -1], [1, 0]]), "Periodic"),
        ("torus_anosov", _m("torus_affine", "Torus", matrix=[[2, 1], [1, 1]]), "NotRegular"),
        ("klein_phi", _m("klein_phi", "Klein", alpha=a1), "KleinPhi"),
        ("klein_psi", _m("klein_psi", "Klein", alpha=a1), "KleinPsi"),
        ("klein_periodic", _m("klein_phi", "Klein", alpha=1 / 3), "Periodic"),
        ("annulus_rotation", _m("annulus_rotation", "Annulus", alpha=a1), "AnnulusRotation"),
        ("annulus_reversing", _m("annulus_reversing", "Annulus", alpha=a1), "AnnulusReversing"),
        ("mobius_strip_rotation", _m("mobius_strip_rotation", "Mobius", alpha=a1),
         "MobiusStrip"),
    ]


def job_gallery(cfg: JobConfig) -> JobOutput:
    budget = cfg.budget()
    rows, table = [], []
    for name, doc, expected in builtin_gallery():
        f = map_from_dict(doc)
        res = classify(f, budget)
        agree = res.cls == expected
        rows.append({"name": name, "map": doc, "expected": expected, "class": res.cls,
                     "params": res.params, "agree": agree})
        table.append([name, f.surface.value, expected, res.cls, _param_text(res.params),
                      int(agree)])
    result = {"rows": rows, "count": len(rows), "agreement": sum(r["agree"] for r in rows)}
    header = ["name", "surface", "expected", "class", "params", "agree"]
    return JobOutput(result, {}, vars(budget).copy(), tables={"gallery": (header, table)})


# ---------------------------------------------------------------------------
# driver


def report(cfg: JobConfig, f: Optional[SurfaceMap], out: JobOutput) -> dict:
    config = {"command": cfg.command, "budgets": out.budgets, "formats": list(cfg.formats),
              "map": f.to_dict() if f is not None else None}
    return {"tool_version": __version__, "config": config, "result": out.result,
            "diagnostics": out.diagnostics}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_outputs(cfg: JobConfig, doc: dict, out: JobOutput) -> list:
    text = dumps(doc)
    if cfg.out is None:
        sys.stdout.write(text)
        return []
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in cfg.formats:
        (d / f"{cfg.command}.json").write_text(text)
        written.append(d / f"{cfg.command}.json")
        for name, extra in out.extra_json.items():
            (d / name).write_text(dumps(extra))
            written.append(d / name)
    if "csv" in cfg.formats:
        for name, (header, rows) in out.tables.items():
            (d / f"{name}.csv").write_text(_csv_text(header, rows))
            written.append(d / f"{name}.csv")
    if out.figure is not None:
        if "svg" in cfg.formats:
            (d / f"{cfg.command}.svg").write_text(to_svg(out.figure))
            written.append(d / f"{cfg.command}.svg")
        if "png" in cfg.formats:
            (d / f"{cfg.command}.png").write_bytes(to_png(out.figure))
            written.append(d / f"{cfg.command}.png")
    return written


def run(cfg: JobConfig) -> int:
    f = None
    if cfg.command == "gallery":
        out = job_gallery(cfg)
    else:
        f = load_map(cfg.map_source)
        try:
            out = {"analyze": job_analyze, "classify": job_classify,
                   "conjugate": job_conjugate, "render": job_render}[cfg.command](f, cfg)
        except ConfigError:
            raise
        except KereError as exc:
            out = JobOutput({"status": "undetermined"},
                            {"reason": f"{type(exc).__name__}: {exc}"})
    write_outputs(cfg, report(cfg, f, out), out)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"kere: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
