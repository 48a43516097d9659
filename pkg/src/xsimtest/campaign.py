"""Seeded campaigns and their on-disk artifacts.

Seeds: run ``i`` of a campaign with master seed ``m`` uses
``derive_seed(m, i)``; evaluation ``k`` inside that run uses
``derive_seed(run_seed, k)``. Both go through :class:`numpy.random.SeedSequence`
so any run or scenario can be re-created on its own.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adas import run_detector
from .analysis import classify, run_hypervolumes
from .config import CampaignConfig
from .fitness import ScenarioOutcome, awa_distances, evaluate
from .scene import CANONICAL, GENES, FrameSpec, TestInput, translate
from .search import Individual, RunResult, nsga2_run, random_search_run
from .simulator import BackendConfig, SimulationTrace

SCHEMA_VERSION = 1

SCENARIO_COLUMNS = (
    "run", "scenario", *GENES, "ff1", "ff2", "ff3", "collision", "detected",
    "detection_time", "termination", "critical", "violation", "backend", "seed",
)

TRACE_COLUMNS = (
    "t", "car_x", "car_y", "car_vx", "car_vy", "ped_x", "ped_y", "ped_vx", "ped_vy",
    "dist", "awa_dist", "ttc", "sensed", "warned",
)


class ArtifactError(ValueError):
    """Missing or malformed run artifacts."""


def derive_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


@dataclass
class CampaignEvaluator:
    """Evaluates canonical test inputs on one backend, seeding each call."""

    backend: BackendConfig
    cfg: CampaignConfig
    run_seed: int
    calls: int = 0

    def __call__(self, x: TestInput) -> ScenarioOutcome:
        native = translate(x, CANONICAL, self.backend.frame)
        seed = derive_seed(self.run_seed, self.calls)
        self.calls += 1
        return evaluate(
            native, self.backend, self.cfg.scene, self.cfg.detector,
            channel=self.cfg.channel, seed=seed, ttc_source=self.cfg.ttc_source,
        )


def run_one(cfg: CampaignConfig, run_index: int) -> RunResult:
    seed = derive_seed(cfg.seed, run_index)
    search = cfg.search.__class__(**{**cfg.search.to_dict(), "seed": seed})
    if cfg.time_budget > 0:
        # wall-clock mode trades reproducibility for the original time budget
        search = search.__class__(**{**search.to_dict(), "budget": 10**9})
    evaluator = CampaignEvaluator(cfg.backend_config(), cfg, seed)
    rng = np.random.default_rng(seed)
    run = nsga2_run if cfg.algorithm == "nsga2" else random_search_run
    deadline = time.monotonic() + cfg.time_budget if cfg.time_budget > 0 else None
    return run(search, evaluator, rng, cfg.input_space(), deadline=deadline)


def run_campaign(cfg: CampaignConfig, jobs: int = 1) -> list[RunResult]:
    if jobs <= 1:
        return [run_one(cfg, i) for i in range(cfg.runs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_one, [cfg] * cfg.runs, range(cfg.runs)))


# -- serialisation ------------------------------------------------------------


def _num(v):
    if v is None:
        return None
    v = float(v)
    return None if math.isinf(v) or math.isnan(v) else v


def individual_to_dict(ind: Individual) -> dict:
    return {
        "genes": ind.input.as_dict(),
        "rank": ind.rank,
        "crowding": _num(ind.crowding),
        "outcome": ind.outcome.to_dict(),
    }


def individual_from_dict(d: dict) -> Individual:
    crowd = d.get("crowding")
    return Individual(
        input=TestInput(**d["genes"]),
        outcome=ScenarioOutcome.from_dict(d["outcome"]),
        rank=int(d.get("rank", 0)),
        crowding=math.inf if crowd is None else float(crowd),
    )


def run_to_dict(result: RunResult, run_index: int, backend: BackendConfig, history: bool = True) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run": run_index,
        "algorithm": result.algorithm,
        "seed": result.seed,
        "backend": backend.to_dict(),
        "frame": backend.frame.to_dict(),
        "search": result.config.to_dict(),
        "evaluations": len(result.evaluated),
        "front": [individual_to_dict(i) for i in result.front],
        "population": [individual_to_dict(i) for i in result.population],
        "history": [[list(p) for p in gen] for gen in result.history] if history else [],
    }


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "True" if v else "False"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def scenario_row(run: int, index: int, outcome: ScenarioOutcome) -> list[str]:
    c = classify(outcome)
    values = [run, index, *(getattr(outcome.input, g) for g in GENES),
              outcome.ff1, outcome.ff2, outcome.ff3, outcome.collision, outcome.detected,
              outcome.detection_time, outcome.termination, c.critical, c.violation,
              outcome.backend, outcome.seed]
    return [_fmt(v) for v in values]


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def read_scenarios_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SCENARIO_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ArtifactError(f"{path}: missing columns {sorted(missing)}")
        return list(reader)


def write_campaign(
    out: Path,
    cfg: CampaignConfig,
    results: list[RunResult],
    config_text: str,
    history: bool = True,
    evaluations: bool = True,
) -> dict:
    """Write per-run JSON, scenario CSVs and a summary; return the summary."""
    out.mkdir(parents=True, exist_ok=True)
    backend = cfg.backend_config()
    (out / "config.txt").write_text(config_text)
    rows, all_rows = [], []
    for i, r in enumerate(results):
        (out / f"run_{i:03d}.json").write_text(dumps_json(run_to_dict(r, i, backend, history)))
        rows += [scenario_row(i, k, ind.outcome) for k, ind in enumerate(r.population)]
        if evaluations:
            all_rows += [scenario_row(i, k, ind.outcome) for k, ind in enumerate(r.evaluated)]
    write_csv(out / "scenarios.csv", SCENARIO_COLUMNS, rows)
    if evaluations:
        write_csv(out / "evaluations.csv", SCENARIO_COLUMNS, all_rows)

    hv = run_hypervolumes([[ind.objectives for ind in r.front] for r in results])
    per_run = []
    for i, (r, h) in enumerate(zip(results, hv)):
        cls = [classify(ind.outcome) for ind in r.population]
        per_run.append({
            "run": i,
            "seed": r.seed,
            "scenarios": len(cls),
            "critical": sum(c.critical for c in cls),
            "violations": sum(c.violation for c in cls),
            "collisions": sum(bool(ind.outcome.collision) for ind in r.population),
            "front_size": len(r.front),
            "evaluations": len(r.evaluated),
            "hypervolume": h,
        })
    summary = {
        "schema_version": SCHEMA_VERSION,
        "backend": cfg.backend,
        "algorithm": cfg.algorithm,
        "runs": len(results),
        "master_seed": cfg.seed,
        "scenarios": sum(p["scenarios"] for p in per_run),
        "critical": sum(p["critical"] for p in per_run),
        "violations": sum(p["violations"] for p in per_run),
        "collisions": sum(p["collisions"] for p in per_run),
        "median_hypervolume": float(np.median(hv)),
        "per_run": per_run,
    }
    (out / "summary.json").write_text(dumps_json(summary))
    return summary


def load_runs(directory: Path) -> list[dict]:
    paths = sorted(Path(directory).glob("run_*.json"))
    if not paths:
        raise ArtifactError(f"no run_*.json artifacts in {directory}")
    runs = []
    for p in paths:
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{p}: {exc}") from None
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ArtifactError(f"{p}: unsupported schema version {d.get('schema_version')!r}")
        runs.append(d)
    return runs


def run_frame(run: dict) -> FrameSpec:
    if "frame" not in run:
        raise ArtifactError(f"run {run.get('run')} carries no frame specification")
    return FrameSpec.from_dict(run["frame"])


def front_objectives(run: dict) -> list[tuple[float, float, float]]:
    return [
        (i["outcome"]["ff1"], i["outcome"]["ff2"], i["outcome"]["ff3"]) for i in run["front"]
    ]


def trace_rows(trace: SimulationTrace, cfg: CampaignConfig, frame: FrameSpec) -> list[list[str]]:
    """Trace samples in a backend's native frame (shifted origin, native speed unit)."""
    event = run_detector(trace, cfg.detector)
    awa = awa_distances(trace, cfg.scene, cfg.detector)
    ox, oy = frame.origin
    k = frame.speed_factor
    rows = []
    for i in range(len(trace)):
        rows.append([_fmt(v) for v in (
            float(trace.t[i]),
            float(trace.car_x[i] + ox), float(trace.car_y[i] + oy),
            float(trace.car_vx[i] * k), float(trace.car_vy[i] * k),
            float(trace.ped_x[i] + ox), float(trace.ped_y[i] + oy),
            float(trace.ped_vx[i] * k), float(trace.ped_vy[i] * k),
            float(trace.dist[i]), float(awa[i]), float(trace.ttc[i]),
            bool(trace.sensed[i]), bool(event.warnings[i]),
        )])
    return rows
