"""Parameter sweeps over generated instances.

A sweep is the cartesian product of a small parameter grid; every cell is
repeated over ``seeds`` generated instances and every repetition runs each
algorithm on the same instance. Seeds derive from ``(master_seed, cell,
rep)`` alone, so rows do not depend on worker count or scheduling. Cells that differ only in
solver knobs (delta, epsilon, omega) share the instance index, so they run on
the same instances and compare paired.

``results.csv`` holds only deterministic columns and is byte-identical across
reruns; wall times go to ``timings.csv`` keyed by ``(cell, rep, algorithm)``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .allocators import ALGORITHMS, SolverConfig, solve
from .generate import generate_instance, preset
from .influence import InfluenceEngine

log = logging.getLogger(__name__)

# solver defaults and allowed ranges for the sweepable knobs
GRID_PARAMS = ("alpha", "beta", "delta", "gamma", "epsilon", "omega")
DEFAULTS = {"alpha": 1.0, "beta": 0.05, "delta": 0.5, "gamma": 100.0, "epsilon": 0.01, "omega": 0.01}
RANGES = {
    "alpha": (0.4, 1.2),
    "beta": (0.01, 0.2),
    "delta": (0.0, 1.0),
    "gamma": (25.0, 150.0),
    "epsilon": (0.01, 0.2),
    "omega": (0.01, 0.2),
}
SWEEP_ALGORITHMS = ("bg", "rg", "rls", "random")

RESULT_FIELDS = (
    "cell", "alpha", "beta", "delta", "gamma", "epsilon", "omega", "algorithm", "rep", "seed",
    "n_advertisers", "n_slots", "n_allocated", "n_satisfied", "excessive", "unsatisfied", "total", "status", "error",
)
TIMING_FIELDS = ("cell", "rep", "algorithm", "wall_ms")
STATS = ("total", "excessive", "unsatisfied")


@dataclass(frozen=True)
class SweepSpec:
    grid: Mapping[str, Sequence[float]] = field(default_factory=dict)
    algorithms: tuple[str, ...] = SWEEP_ALGORITHMS
    seeds: int = 10
    master_seed: int = 0
    preset: str = "nyc-micro"
    generator: Mapping[str, object] = field(default_factory=dict)
    config: Mapping[str, object] = field(default_factory=dict)
    allow_off_grid: bool = False

    def __post_init__(self):
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        unknown = set(self.grid) - set(GRID_PARAMS)
        if unknown:
            raise ValueError(f"unknown grid parameters {sorted(unknown)}; expected a subset of {GRID_PARAMS}")
        for k, values in self.grid.items():
            if not values:
                raise ValueError(f"grid parameter {k} has no values")
            lo, hi = RANGES[k]
            off = [v for v in values if not lo <= v <= hi]
            if off and not self.allow_off_grid:
                raise ValueError(f"{k} values {off} outside [{lo}, {hi}]; set allow_off_grid to use them")
        for a in self.algorithms:
            if a not in ALGORITHMS or a == "oracle":
                raise ValueError(f"unknown sweep algorithm {a!r}")

    @classmethod
    def from_json(cls, path, **overrides) -> "SweepSpec":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        if "grid" not in data:
            data = {"grid": {k: v for k, v in data.items() if k in GRID_PARAMS}, **{k: v for k, v in data.items() if k not in GRID_PARAMS}}
        extra = set(data) - known
        if extra:
            raise ValueError(f"{path}: unknown keys {sorted(extra)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        if "algorithms" in data:
            data["algorithms"] = tuple(data["algorithms"])
        return cls(**data)

    def cells(self) -> list[dict[str, float]]:
        """Grid points; knobs not on the grid keep the generator's or solver's default."""
        gen = preset(self.preset, **self.generator)
        base = {**DEFAULTS, "alpha": gen.alpha, "beta": gen.beta, "gamma": gen.gamma}
        keys = [k for k in GRID_PARAMS if k in self.grid]
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            cell = dict(base)
            cell.update({k: float(v) for k, v in zip(keys, combo)})
            out.append(cell)
        return out


def derive_seed(master: int, cell: int, rep: int) -> int:
    return int(np.random.SeedSequence([master, cell, rep]).generate_state(1, dtype=np.uint32)[0])


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


GENERATOR_KEYS = ("alpha", "beta", "gamma")


def instance_indices(cells: Sequence[Mapping[str, float]]) -> list[int]:
    """Index of each cell's generator settings, in order of first appearance."""
    seen: dict[tuple, int] = {}
    return [seen.setdefault(tuple(c[k] for k in GENERATOR_KEYS), len(seen)) for c in cells]


def _run_unit(spec: SweepSpec, cell_index: int, cell: dict, rep: int, instance_index: int | None = None):
    """Generate one instance and run every algorithm on it."""
    seed = derive_seed(spec.master_seed, cell_index if instance_index is None else instance_index, rep)
    base = {k: cell[k] for k in GRID_PARAMS}
    rows, timings, traces = [], [], {}
    try:
        params = preset(spec.preset, **{**spec.generator, "alpha": cell["alpha"], "beta": cell["beta"], "gamma": cell["gamma"], "seed": seed})
        instance = generate_instance(params)
        engine = InfluenceEngine(instance, cell["gamma"])
    except Exception as e:  # noqa: BLE001 - a broken cell is reported, not fatal
        for a in spec.algorithms:
            rows.append(_failed_row(cell_index, base, a, rep, seed, e))
        return rows, timings, traces
    for algo in spec.algorithms:
        row = {"cell": cell_index, **base, "algorithm": algo, "rep": rep, "seed": seed,
               "n_advertisers": len(instance.advertisers), "n_slots": len(instance.slots)}
        try:
            config = SolverConfig(
                algorithm=algo, seed=seed, delta=cell["delta"], gamma=cell["gamma"],
                epsilon=cell["epsilon"], omega=cell["omega"], **spec.config,
            )
            t0 = time.perf_counter()
            result = solve(instance, config, engine=engine)
            wall = (time.perf_counter() - t0) * 1000.0
        except Exception as e:  # noqa: BLE001
            rows.append(_failed_row(cell_index, base, algo, rep, seed, e))
            continue
        rep_ = result.report
        row.update(
            n_allocated=result.allocation.n_allocated(), n_satisfied=rep_.n_satisfied,
            excessive=rep_.excessive, unsatisfied=rep_.unsatisfied, total=rep_.total, status="ok", error="",
        )
        rows.append(row)
        timings.append({"cell": cell_index, "rep": rep, "algorithm": algo, "wall_ms": wall})
        traces[f"c{cell_index:03d}_r{rep:02d}_{algo}.csv"] = trace_csv(result.trace)
    return rows, timings, traces


def _failed_row(cell_index, base, algo, rep, seed, exc):
    log.warning("cell %d rep %d %s failed: %s", cell_index, rep, algo, exc)
    return {"cell": cell_index, **base, "algorithm": algo, "rep": rep, "seed": seed,
            "n_advertisers": 0, "n_slots": 0, "n_allocated": 0, "n_satisfied": 0,
            "excessive": math.nan, "unsatisfied": math.nan, "total": math.nan,
            "status": "failed", "error": f"{type(exc).__name__}: {exc}".replace("\n", " ")}


def trace_csv(trace) -> str:
    lines = ["adv_id,pointer,tag_id,slot_id,score,remaining"]
    lines += [f"{s.adv_id},{s.pointer},{s.tag_id},{s.slot_id},{s.score!r},{s.remaining!r}" for s in trace.steps]
    lines += [f"# warning: {w}" for w in trace.warnings]
    return "\n".join(lines) + "\n"


@dataclass
class SweepResult:
    rows: list[dict]
    timings: list[dict]
    traces: dict[str, str]

    @property
    def n_failed(self) -> int:
        return sum(r["status"] != "ok" for r in self.rows)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    cells = spec.cells()
    inst = instance_indices(cells)
    units = [(i, cell, rep, inst[i]) for i, cell in enumerate(cells) for rep in range(spec.seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_unit, itertools.repeat(spec), *zip(*units)))
    else:
        outs = [_run_unit(spec, *u) for u in units]
    rows, timings, traces = [], [], {}
    for r, t, tr in outs:
        rows.extend(r)
        timings.extend(t)
        traces.update(tr)
    order = {a: k for k, a in enumerate(spec.algorithms)}
    key = lambda r: (r["cell"], r["rep"], order[r["algorithm"]])  # noqa: E731
    return SweepResult(sorted(rows, key=key), sorted(timings, key=key), traces)


def format_csv(fieldnames, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fieldnames)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in fieldnames])
    return buf.getvalue()


def write_csv(path, fieldnames, rows) -> None:
    Path(path).write_text(format_csv(fieldnames, rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k, v in r.items():
            if k in ("cell", "rep", "seed", "n_advertisers", "n_slots", "n_allocated", "n_satisfied"):
                r[k] = int(v)
            elif k in GRID_PARAMS or k in STATS or k == "wall_ms":
                r[k] = float(v)
    return rows


def write_sweep(result: SweepResult, out_dir, spec: SweepSpec | None = None) -> Path:
    out = Path(out_dir)
    (out / "trace").mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", RESULT_FIELDS, result.rows)
    write_csv(out / "timings.csv", TIMING_FIELDS, result.timings)
    for name, text in sorted(result.traces.items()):
        (out / "trace" / name).write_text(text)
    summary = summarize(result.rows, result.timings)
    write_csv(out / "summary.csv", SUMMARY_FIELDS, summary)
    if spec is not None:
        (out / "sweep.json").write_text(json.dumps(_spec_dict(spec), indent=2, sort_keys=True) + "\n")
    return out


def _spec_dict(spec: SweepSpec) -> dict:
    return {
        "grid": {k: list(v) for k, v in spec.grid.items()},
        "algorithms": list(spec.algorithms),
        "seeds": spec.seeds,
        "master_seed": spec.master_seed,
        "preset": spec.preset,
        "generator": dict(spec.generator),
        "config": dict(spec.config),
        "allow_off_grid": spec.allow_off_grid,
    }


SUMMARY_FIELDS = (
    "cell", *GRID_PARAMS, "algorithm", "n",
    *(f"{s}_{m}" for s in STATS for m in ("mean", "median", "std")),
    "n_satisfied_mean", "wall_ms_mean", "excessive_share", "beats_random", "highest_regret",
)


def _std(xs) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def summarize(rows: Sequence[Mapping], timings: Sequence[Mapping] = ()) -> list[dict]:
    """Per (cell, algorithm) statistics over successful rows, plus ordering flags.

    ``beats_random`` is true when the algorithm's mean total regret is below
    Random's in the same cell (empty when Random was not run);
    ``highest_regret`` marks the algorithm with the largest mean total.
    """
    groups: dict[tuple, list[Mapping]] = {}
    for r in rows:
        if r["status"] == "ok":
            groups.setdefault((r["cell"], r["algorithm"]), []).append(r)
    walls: dict[tuple, list[float]] = {}
    for t in timings:
        walls.setdefault((t["cell"], t["algorithm"]), []).append(t["wall_ms"])
    out = []
    for (cell, algo), rs in groups.items():
        s = {"cell": cell, **{k: rs[0][k] for k in GRID_PARAMS}, "algorithm": algo, "n": len(rs)}
        for stat in STATS:
            xs = [r[stat] for r in rs]
            s[f"{stat}_mean"] = statistics.fmean(xs)
            s[f"{stat}_median"] = statistics.median(xs)
            s[f"{stat}_std"] = _std(xs)
        s["n_satisfied_mean"] = statistics.fmean(r["n_satisfied"] for r in rs)
        w = walls.get((cell, algo))
        s["wall_ms_mean"] = statistics.fmean(w) if w else math.nan
        s["excessive_share"] = s["excessive_mean"] / s["total_mean"] if s["total_mean"] > 0 else 0.0
        out.append(s)
    by_cell: dict[int, list[dict]] = {}
    for s in out:
        by_cell.setdefault(s["cell"], []).append(s)
    for cell_rows in by_cell.values():
        rand = next((s for s in cell_rows if s["algorithm"] == "random"), None)
        top = max(s["total_mean"] for s in cell_rows)
        for s in cell_rows:
            s["beats_random"] = "" if rand is None else str(s["total_mean"] < rand["total_mean"]).lower()
            s["highest_regret"] = str(s["total_mean"] == top).lower()
    out.sort(key=lambda s: (s["cell"], s["algorithm"]))
    return out
