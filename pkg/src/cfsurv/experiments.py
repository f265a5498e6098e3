"""Seeded multi-drop sweeps and their result tables.

Every (sweep point, drop) pair is an independent task whose random streams
are keyed by ``(seed, point, drop)``, so tables do not depend on the number
of workers or on completion order.  Rows are assembled in (point, drop,
scheme, baseline) order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import analytic, optimize
from .analytic import MR, PZF
from .config import ConfigError, SystemConfig
from .optimize import Strategy
from .scenario import build_colocated_statistics, make_rng, make_scenario

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("none", "M", "D", "K", "N", "N_total", "si_ratio")

# name -> pipeline strategy; co-located baselines are handled separately
BASELINES = {
    "proposed": Strategy(),
    "case1": Strategy(power="equal", weights="unit"),
    "case2": Strategy(weights="unit"),
    "random_modes": Strategy(modes="random"),
    "lsf_grouping": Strategy(grouping="lsf"),
}
COLOCATED = ("colocated", "colocated_perfect_si", "colocated_hd")
ALL_BASELINES = tuple(BASELINES) + COLOCATED

# streams for baseline-specific randomness sit past any drop-level key
_TAG_BASELINE = 1000
_TAG_COLOCATED = 2000


@dataclass(frozen=True)
class ExperimentSpec:
    sweep: str = "none"
    values: tuple = (None,)
    drops: int = 50
    schemes: tuple = (MR, PZF)
    baselines: tuple = ("proposed",)
    seed: int = 0
    total_antennas: int = 240
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "baselines", tuple(self.baselines))
        self.validate()

    def validate(self) -> None:
        if self.sweep not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep must be one of {SWEEP_VARIABLES}, got {self.sweep!r}")
        if self.drops < 1:
            raise ConfigError("drops must be >= 1")
        if not self.values:
            raise ConfigError("value list must be nonempty")
        for s in self.schemes:
            if s not in (MR, PZF):
                raise ConfigError(f"unknown scheme {s!r}")
        for b in self.baselines:
            if b not in ALL_BASELINES:
                raise ConfigError(f"unknown baseline {b!r}; choose from {ALL_BASELINES}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {', '.join(unknown)}")
        return cls(**dict(data))


def parse_config(path) -> tuple[SystemConfig, ExperimentSpec]:
    """Read a YAML file with optional ``system`` and ``experiment`` sections.

    Missing keys take the defaults of :class:`SystemConfig` and
    :class:`ExperimentSpec`; an empty file yields all defaults.
    """
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = sorted(set(data) - {"system", "experiment"})
    if unknown:
        raise ConfigError(f"{path}: unknown sections: {', '.join(unknown)}")
    try:
        config = SystemConfig.from_mapping(data.get("system") or {})
        spec = ExperimentSpec.from_mapping(data.get("experiment") or {})
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config, spec


def point_config(config: SystemConfig, spec: ExperimentSpec, value) -> SystemConfig:
    """Configuration of one sweep point."""
    if spec.sweep == "none":
        return config
    if spec.sweep == "M":
        return config.replace(num_mns=int(value))
    if spec.sweep == "D":
        return config.replace(area_side=float(value))
    if spec.sweep == "K":
        return config.replace(num_pairs=int(value))
    if spec.sweep == "N":
        return config.replace(antennas_per_mn=int(value))
    if spec.sweep == "N_total":
        n = int(value)
        if spec.total_antennas % n:
            raise ConfigError(f"N={n} does not divide the antenna total {spec.total_antennas}")
        return config.replace(antennas_per_mn=n, num_mns=spec.total_antennas // n)
    if spec.sweep == "si_ratio":
        return config.replace(si_ratio=float(value))
    raise ConfigError(f"unknown sweep variable {spec.sweep!r}")


# --------------------------------------------------------------------------
# result table
# --------------------------------------------------------------------------

COLUMNS = (
    "point", "value", "scheme", "baseline", "drop", "status",
    "min_msp", "mean_msp", "max_msp", "zeta", "num_jammers", "elapsed_s",
)


@dataclass
class ResultTable:
    """One row per (sweep value, scheme, baseline, drop).

    ``elapsed_s`` is wall-clock time and differs between runs; it is dropped
    from emitted files unless explicitly requested.
    """

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def averages(self) -> list[dict]:
        """Mean min/mean MSP per (point, scheme, baseline) over successful drops."""
        groups: dict = {}
        for r in self.rows:
            key = (r["point"], r["value"], r["scheme"], r["baseline"])
            groups.setdefault(key, []).append(r)
        out = []
        for (point, value, scheme, baseline), rows in groups.items():
            ok = [r for r in rows if r["status"] == "ok"]
            out.append({
                "point": point,
                "value": value,
                "scheme": scheme,
                "baseline": baseline,
                "drops": len(ok),
                "avg_min_msp": float(np.mean([r["min_msp"] for r in ok])) if ok else float("nan"),
                "avg_mean_msp": float(np.mean([r["mean_msp"] for r in ok])) if ok else float("nan"),
            })
        return out

    def average(self, value, scheme, baseline) -> float:
        for a in self.averages():
            if a["value"] == value and a["scheme"] == scheme and a["baseline"] == baseline:
                return a["avg_min_msp"]
        raise KeyError((value, scheme, baseline))

    def to_dict(self) -> dict:
        return {"meta": self.meta, "rows": self.rows}

    @classmethod
    def from_dict(cls, data) -> "ResultTable":
        return cls(rows=list(data["rows"]), meta=dict(data.get("meta", {})))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def emit_results(table: ResultTable, path, fmt: str = "csv", *, include_timing: bool = False) -> Path:
    """Write ``table`` to ``path`` as CSV or JSON.

    Floats are written with ``repr`` so that output is byte-stable for equal
    tables and JSON round-trips exactly.
    """
    path = Path(path)
    columns = [c for c in COLUMNS if include_timing or c != "elapsed_s"]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in table.rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
        path.write_text(buf.getvalue())
    elif fmt == "json":
        rows = [{c: row.get(c) for c in columns} for row in table.rows]
        payload = {"meta": table.meta, "columns": columns, "rows": rows, "averages": table.averages()}
        path.write_text(json.dumps(payload, indent=1, sort_keys=True, allow_nan=True) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def load_results(path) -> ResultTable:
    data = json.loads(Path(path).read_text())
    return ResultTable(rows=data["rows"], meta=data.get("meta", {}))


# --------------------------------------------------------------------------
# evaluation of one drop
# --------------------------------------------------------------------------

def colocated_min_msp(geometry, stats, config, scheme, variant, rng):
    """Co-located FD baseline with bisection power control.

    The array is modeled as a two-node system: node 0 observes with
    ``N_CL`` antennas and node 1 jams with ``N_CL`` antennas, coupled through
    the residual self-interference gain.  ``colocated_hd`` uses all ``N*M``
    antennas for observing and does not jam.
    """
    n_cl = config.antennas_per_mn * config.num_mns // 2
    if variant == "colocated_hd":
        co = build_colocated_statistics(geometry, stats, config, rng, num_antennas=2 * n_cl)
        cf = co.as_cell_free()
        mode = np.array([0, 1])
        zf = _colocated_zf(cf, scheme)
        design = analytic.SurveillanceDesign(
            mode=mode, theta=np.zeros((2, cf.num_pairs)),
            alpha=analytic.unit_weights(mode, cf.num_pairs), zf_mask=zf,
        )
        return analytic.evaluate(design, cf, scheme)
    si = 0.0 if variant == "colocated_perfect_si" else None
    co = build_colocated_statistics(geometry, stats, config, rng, si_gain=si, num_antennas=n_cl)
    cf = co.as_cell_free()
    mode = np.array([0, 1])
    design = analytic.baseline_design(mode, cf, _colocated_zf(cf, scheme))
    theta, _, _ = optimize.bisection_power(design, cf, config, scheme)
    return analytic.evaluate(design.with_(theta=theta), cf, scheme)


def _colocated_zf(cf, scheme):
    if scheme == MR:
        return None
    if cf.num_antennas <= cf.num_pairs:
        raise analytic.InvalidDesignError(
            f"co-located full ZF needs N_CL >= K+1; N_CL={cf.num_antennas}, K={cf.num_pairs}"
        )
    mask = np.zeros((2, cf.num_pairs), dtype=bool)
    mask[0] = True
    return mask


def _row(point, value, scheme, baseline, drop):
    return {
        "point": point, "value": value, "scheme": scheme, "baseline": baseline, "drop": drop,
        "status": "ok", "min_msp": float("nan"), "mean_msp": float("nan"), "max_msp": float("nan"),
        "zeta": float("nan"), "num_jammers": -1, "elapsed_s": 0.0,
    }


def run_drop(task) -> list[dict]:
    """All (scheme, baseline) rows of one (point, drop)."""
    config, spec, point, value, drop = task
    rows = []
    try:
        cfg = point_config(config, spec, value).replace(rng_seed=spec.seed)
        geometry, stats = make_scenario(cfg, point, drop)
    except Exception as exc:  # recorded, the sweep goes on
        for scheme in spec.schemes:
            for baseline in spec.baselines:
                row = _row(point, value, scheme, baseline, drop)
                row["status"] = f"error: {exc}"
                rows.append(row)
        return rows
    for scheme in spec.schemes:
        for b_idx, baseline in enumerate(spec.baselines):
            row = _row(point, value, scheme, baseline, drop)
            start = time.perf_counter()
            try:
                if baseline in COLOCATED:
                    rng = make_rng(spec.seed, point, drop, _TAG_COLOCATED)
                    report = colocated_min_msp(geometry, stats, cfg, scheme, baseline, rng)
                    row["num_jammers"] = 0 if baseline == "colocated_hd" else 1
                else:
                    rng = make_rng(spec.seed, point, drop, _TAG_BASELINE + b_idx)
                    res = optimize.solve_pipeline(stats, cfg, scheme, BASELINES[baseline], rng)
                    report = analytic.evaluate(res.design, stats, scheme)
                    row["zeta"] = float(res.zeta)
                    row["num_jammers"] = int(res.design.jammers.size)
                row["min_msp"] = float(np.min(report.msp))
                row["mean_msp"] = float(np.mean(report.msp))
                row["max_msp"] = float(np.max(report.msp))
            except Exception as exc:
                row["status"] = f"error: {type(exc).__name__}: {exc}"
                log.warning("point %s drop %s %s/%s failed: %s", point, drop, scheme, baseline, exc)
            row["elapsed_s"] = time.perf_counter() - start
            rows.append(row)
    return rows


def run_sweep(config: SystemConfig, spec: ExperimentSpec, *, workers: int | None = None) -> ResultTable:
    workers = spec.workers if workers is None else workers
    tasks = [
        (config, spec, point, value, drop)
        for point, value in enumerate(spec.values)
        for drop in range(spec.drops)
    ]
    if workers <= 1:
        chunks = [run_drop(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_drop, tasks))
    rows = [r for chunk in chunks for r in chunk]
    meta = {
        "config": config.to_dict(),
        "spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(spec).items()
                 if k not in ("output", "workers")},
    }
    return ResultTable(rows=rows, meta=meta)


# --------------------------------------------------------------------------
# figure analogs
# --------------------------------------------------------------------------

PRESETS = {
    # greedy vs random modes and grouping baselines against M
    "fig2": dict(sweep="M", values=(10, 20, 30), baselines=("proposed", "random_modes", "lsf_grouping")),
    # equal allocation vs optimized, fixed antenna total
    "fig3": dict(sweep="N_total", values=(4, 6, 12), baselines=("case1", "case2", "proposed")),
    # cell-free vs co-located against the area size
    "fig4": dict(sweep="D", values=(0.5, 0.75, 1.0), schemes=(MR,), baselines=("proposed", "colocated")),
    # number of MNs, cell-free vs co-located
    "fig5": dict(sweep="M", values=(20, 40, 60), schemes=(MR,), baselines=("proposed", "colocated")),
    # co-located SI levels and the half-duplex reference
    "fig6": dict(
        sweep="si_ratio", values=(30.0, 60.0, 100.0), schemes=(MR,),
        baselines=("proposed", "colocated", "colocated_perfect_si", "colocated_hd"),
    ),
}


def preset_spec(name: str, **overrides) -> ExperimentSpec:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    params = dict(PRESETS[name])
    params.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**params)
