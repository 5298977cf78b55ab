"""Monte Carlo studies: MSE ratio of the adaptive weighted estimator to the
rank-based CFG estimator, and coverage of JEL confidence intervals.

Replicate ``r`` of every cell draws its sample from ``RngStream(seed, r)``,
so results do not depend on execution order or worker count. Aggregates
use exactly rounded sums (``math.fsum``) for the same reason.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from importlib import resources
from pathlib import Path
from typing import Callable

import jsonschema
import numpy as np

from evdep.empirical import KERNELS, pseudo_observations
from evdep.errors import EvdepError, ParameterError
from evdep.estimators import WeightSpec, adaptive_weighted, cfg_rank
from evdep.jel import JelConfig, JelFit, TuningWarning
from evdep.models import PickandsModel
from evdep.numerics import RngStream

log = logging.getLogger(__name__)

MSE_RATIO = "mse_ratio"
COVERAGE = "coverage"

COVERAGE_COLUMNS = ["family", "theta", "n", "t", "level", "coverage", "mean_width", "failures"]
MSE_COLUMNS = ["family", "theta", "n", "t", "mse_adaptive", "mse_cfg", "ratio", "failures"]

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["mode"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": [MSE_RATIO, COVERAGE]},
        "families": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["family", "theta"],
                "additionalProperties": False,
                "properties": {"family": {"type": "string"}, "theta": {"type": "number"}},
            },
        },
        "sizes": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 3}},
        "optional_sizes": {"type": "array", "items": {"type": "integer", "minimum": 3}},
        "t_grid": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "cells": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["family", "theta", "n", "t"],
                "additionalProperties": False,
                "properties": {
                    "family": {"type": "string"},
                    "theta": {"type": "number"},
                    "n": {"type": "integer", "minimum": 3},
                    "t": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                },
            },
        },
        "replicates": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "levels": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        },
        "jel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "h_scale": {"type": "number", "exclusiveMinimum": 0},
                "a_n": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
                "b_n": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
                "kernel": {"enum": sorted(KERNELS)},
                "weight": {"type": "string"},
                "quad_order": {"type": "integer", "minimum": 1},
            },
        },
        "description": {"type": "string"},
    },
    "anyOf": [{"required": ["cells"]}, {"required": ["families", "sizes", "t_grid"]}],
}


class ConfigError(EvdepError, ValueError):
    """Experiment configuration violates the schema."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def parse_weight(text: str) -> WeightSpec:
    """``adaptive`` or ``powerlog:<q>``."""
    text = text.strip().lower()
    if text == "adaptive":
        return WeightSpec.adaptive()
    if text.startswith("powerlog:"):
        return WeightSpec.power_log(float(text.split(":", 1)[1]))
    raise ParameterError(f"unknown weight {text!r}; use 'adaptive' or 'powerlog:<q>'")


def jel_config_from_dict(d: dict) -> JelConfig:
    kw = dict(d)
    if "kernel" in kw:
        kw["kernel"] = KERNELS[kw["kernel"]]
    if "weight" in kw:
        kw["weight"] = parse_weight(kw["weight"])
    return JelConfig(**kw)


def jel_config_to_dict(cfg: JelConfig) -> dict:
    return {
        "h": cfg.h,
        "h_scale": cfg.h_scale,
        "a_n": cfg.a_n,
        "b_n": cfg.b_n,
        "kernel": cfg.kernel.name,
        "weight": str(cfg.weight),
        "quad_order": cfg.quad_order,
    }


@dataclass
class ExperimentConfig:
    mode: str
    families: list[PickandsModel] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    t_grid: list[float] = field(default_factory=list)
    replicates: int = 1000
    seed: int = 20111
    levels: list[float] = field(default_factory=lambda: [0.9, 0.95])
    jel: JelConfig = field(default_factory=JelConfig)
    cells: list[tuple[PickandsModel, int, float]] | None = None
    optional_sizes: list[int] = field(default_factory=list)
    description: str = ""

    def __post_init__(self):
        if self.mode not in (MSE_RATIO, COVERAGE):
            raise ConfigError(f"unknown mode {self.mode!r}", "mode")
        if self.replicates < 1:
            raise ConfigError("must be >= 1", "replicates")
        if self.mode == COVERAGE:
            for t in [c[2] for c in self.expand_cells()]:
                if not 0 < t < 1:
                    raise ConfigError(f"t={t} must lie in (0, 1) for coverage", "t_grid")

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(d), key=lambda e: list(e.absolute_path))
        if errors:
            err = errors[0]
            path = "/".join(str(p) for p in err.absolute_path) or "<root>"
            raise ConfigError(err.message, path)
        try:
            fams = [PickandsModel(f["family"], f["theta"]) for f in d.get("families", [])]
            cells = None
            if "cells" in d:
                cells = [(PickandsModel(c["family"], c["theta"]), c["n"], float(c["t"])) for c in d["cells"]]
            jel = jel_config_from_dict(d.get("jel", {}))
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        return cls(
            mode=d["mode"],
            families=fams,
            sizes=list(d.get("sizes", [])),
            t_grid=[float(t) for t in d.get("t_grid", [])],
            replicates=d.get("replicates", 1000),
            seed=d.get("seed", 20111),
            levels=[float(x) for x in d.get("levels", [0.9, 0.95])],
            jel=jel,
            cells=cells,
            optional_sizes=list(d.get("optional_sizes", [])),
            description=d.get("description", ""),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "replicates": self.replicates,
            "seed": self.seed,
            "levels": list(self.levels),
            "jel": jel_config_to_dict(self.jel),
        }
        if self.cells is not None:
            d["cells"] = [
                {"family": m.family.value, "theta": m.theta, "n": n, "t": t} for m, n, t in self.cells
            ]
        else:
            d["families"] = [{"family": m.family.value, "theta": m.theta} for m in self.families]
            d["sizes"] = list(self.sizes)
            d["t_grid"] = list(self.t_grid)
        if self.optional_sizes:
            d["optional_sizes"] = list(self.optional_sizes)
        if self.description:
            d["description"] = self.description
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def expand_cells(self, include_optional: bool = False) -> list[tuple[PickandsModel, int, float]]:
        if self.cells is not None:
            return list(self.cells)
        sizes = list(self.sizes) + (list(self.optional_sizes) if include_optional else [])
        return [(m, n, t) for m in self.families for n in sizes for t in self.t_grid]


def load_bundled_config(name: str) -> ExperimentConfig:
    """One of the packaged study configs, e.g. ``"table1"`` or ``"figure1"``."""
    fname = name if name.endswith(".json") else f"{name}.json"
    text = resources.files("evdep.configs").joinpath(fname).read_text()
    return ExperimentConfig.from_dict(json.loads(text))


# -- report ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    mode: str
    rows: list[dict]
    metadata: dict

    @property
    def columns(self) -> list[str]:
        return COVERAGE_COLUMNS if self.mode == COVERAGE else MSE_COLUMNS

    def content_hash(self) -> str:
        """Hash of everything except wall-clock metadata."""
        meta = {k: v for k, v in self.metadata.items() if k != "wall_time"}
        blob = json.dumps({"mode": self.mode, "rows": self.rows, "meta": meta}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def find(self, **keys) -> list[dict]:
        out = []
        for row in self.rows:
            if all(_match(row[k], v) for k, v in keys.items()):
                out.append(row)
        return out

    def to_dict(self) -> dict:
        return {"mode": self.mode, "rows": self.rows, "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentReport:
        return cls(d["mode"], d["rows"], d["metadata"])


def _match(a, b) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(float(a), float(b), rel_tol=0, abs_tol=1e-12)
    return a == b


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6f}"
    return str(value)


def emit_report(report: ExperimentReport, fmt: str, path: str | Path) -> None:
    """Write ``report`` as CSV (fixed columns, 6-decimal floats) or JSON."""
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(report.columns)
            for row in report.rows:
                writer.writerow([_fmt(row[c]) for c in report.columns])
    elif fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        raise ParameterError(f"unknown report format {fmt!r}")


def read_report_json(path: str | Path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text()))


# -- replicate workers ------------------------------------------------------------------

Estimator = Callable[[object, float], float]


def _mse_replicate(r, model, n, ts, seed, estimators):
    ps = pseudo_observations(model.sample(n, RngStream(seed, r)))
    out = {}
    for t in ts:
        vals = {}
        for name, fn in estimators.items():
            try:
                vals[name] = float(fn(ps, t))
            except (EvdepError, ArithmeticError, ValueError) as exc:
                log.debug("replicate %d t=%g %s failed: %s", r, t, name, exc)
                vals = None
                break
            if not math.isfinite(vals[name]):
                vals = None
                break
        out[t] = vals
    return out


def _coverage_replicate(r, model, n, ts, seed, levels, jel):
    ps = pseudo_observations(model.sample(n, RngStream(seed, r)))
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TuningWarning)
        for t in ts:
            truth = float(model.A(t))
            try:
                fit = JelFit.build(ps, t, jel)
                point = fit.point_estimate()
                res = {}
                for level in levels:
                    iv = fit.interval(level, point)
                    res[level] = (iv.contains(truth), iv.width, iv.lo_open or iv.hi_open)
                out[t] = res
            except EvdepError as exc:
                log.debug("replicate %d t=%g failed: %s", r, t, exc)
                out[t] = None
        ps.cache.clear()
    return out


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("EVDEP_THREADS", "1") or 1)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def _map_replicates(worker, replicates: int, threads: int):
    if threads <= 1:
        return [worker(r) for r in range(replicates)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(replicates), chunksize=max(1, replicates // (4 * threads))))


def _groups(cells):
    groups: dict[tuple, list[float]] = {}
    for model, n, t in cells:
        groups.setdefault((model, n), [])
        if t not in groups[(model, n)]:
            groups[(model, n)].append(t)
    return groups


def _metadata(cfg: ExperimentConfig, started: float, threads: int) -> dict:
    return {
        "seed": cfg.seed,
        "replicates": cfg.replicates,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "wall_time": time.time() - started,
        "threads": threads,
    }


def run_mse_experiment(
    cfg: ExperimentConfig,
    threads: int | None = None,
    include_optional: bool = False,
    estimators: dict[str, Estimator] | None = None,
) -> ExperimentReport:
    """Per cell: MSE of the adaptive weighted and CFG estimators against the
    true A(t), and their ratio. Failed replicates are excluded and counted."""
    if cfg.mode != MSE_RATIO:
        raise ConfigError(f"expected mode {MSE_RATIO!r}", "mode")
    estimators = estimators or {"adaptive": adaptive_weighted, "cfg": cfg_rank}
    threads = resolve_threads(threads)
    started = time.time()
    rows = []
    for (model, n), ts in _groups(cfg.expand_cells(include_optional)).items():
        worker = partial(_mse_replicate, model=model, n=n, ts=ts, seed=cfg.seed, estimators=estimators)
        results = _map_replicates(worker, cfg.replicates, threads)
        for t in ts:
            truth = float(model.A(t))
            ok = [res[t] for res in results if res[t] is not None]
            failures = len(results) - len(ok)
            if ok:
                mse_a = math.fsum((v["adaptive"] - truth) ** 2 for v in ok) / len(ok)
                mse_c = math.fsum((v["cfg"] - truth) ** 2 for v in ok) / len(ok)
                ratio = mse_a / mse_c if mse_c > 0 else math.nan
            else:
                mse_a = mse_c = ratio = math.nan
            rows.append(
                {
                    "family": model.family.label,
                    "theta": model.theta,
                    "n": n,
                    "t": t,
                    "mse_adaptive": mse_a,
                    "mse_cfg": mse_c,
                    "ratio": ratio,
                    "failures": failures,
                }
            )
    return ExperimentReport(MSE_RATIO, rows, _metadata(cfg, started, threads))


def run_coverage_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Per cell and level: fraction of replicates whose JEL interval
    contains the true A(t), with mean width and failure counts."""
    if cfg.mode != COVERAGE:
        raise ConfigError(f"expected mode {COVERAGE!r}", "mode")
    threads = resolve_threads(threads)
    started = time.time()
    rows = []
    for (model, n), ts in _groups(cfg.expand_cells()).items():
        worker = partial(
            _coverage_replicate, model=model, n=n, ts=ts, seed=cfg.seed, levels=list(cfg.levels), jel=cfg.jel
        )
        results = _map_replicates(worker, cfg.replicates, threads)
        for t in ts:
            ok = [res[t] for res in results if res[t] is not None]
            failures = len(results) - len(ok)
            for level in cfg.levels:
                hits = [v[level] for v in ok]
                m = len(hits)
                rows.append(
                    {
                        "family": model.family.label,
                        "theta": model.theta,
                        "n": n,
                        "t": t,
                        "level": level,
                        "coverage": sum(h[0] for h in hits) / m if m else math.nan,
                        "mean_width": math.fsum(h[1] for h in hits) / m if m else math.nan,
                        "failures": failures,
                        "half_open": sum(h[2] for h in hits),
                    }
                )
    return ExperimentReport(COVERAGE, rows, _metadata(cfg, started, threads))


def run_experiment(cfg: ExperimentConfig, threads: int | None = None, include_optional: bool = False):
    if cfg.mode == MSE_RATIO:
        return run_mse_experiment(cfg, threads, include_optional)
    return run_coverage_experiment(cfg, threads)
