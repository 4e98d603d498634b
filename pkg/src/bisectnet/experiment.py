"""Seeded Monte-Carlo orchestration, RMSE aggregation, and result emission.

An experiment samples connected interaction graphs, runs a fixed number of
trials on each, and pools every trial into min/avg/max RMSE curves indexed by
iteration.  Each trial's randomness is named by (master seed, graph index,
trial index), so results are bit-identical no matter how many workers run
them or in which order.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import seeding
from .network import GraphSpec, sample_er_irreducible
from .protocol import run_trial
from .records import MetricSeries, RmseCurves, TrialConfig

RESULT_SCHEMA_VERSION = 1


def trial_seed(master_seed: int, graph_index: int, trial_index: int) -> int:
    return seeding.mix64(master_seed, seeding.TAG_TRIAL, graph_index, trial_index)


def graph_seed(master_seed: int, graph_index: int) -> int:
    return seeding.mix64(master_seed, seeding.TAG_GRAPH, graph_index)


def aggregate_rmse(series: Sequence[MetricSeries], estimator: str = "mean") -> RmseCurves:
    """Pool trials into per-iteration min/avg/max RMSE curves.

    Per iteration: the square root of the trial-average of the per-trial
    minimum, maximum, and agent-average squared error.  Trials reduce in
    ascending index order so the result is bit-deterministic.
    """
    if not series:
        raise ValueError("need at least one trial")
    t = series[0].n_iterations
    m = series[0].n_agents
    for s in series:
        if s.n_iterations != t or s.n_agents != m:
            raise ValueError("all trials must share iteration and agent counts")
    se = np.stack([s.se(estimator) for s in series])  # (trials, T, A)
    return RmseCurves(
        iteration=np.asarray(series[0].iterations).copy(),
        rmse_min=np.sqrt(se.min(axis=2).mean(axis=0)),
        rmse_avg=np.sqrt(se.mean(axis=2).mean(axis=0)),
        rmse_max=np.sqrt(se.max(axis=2).mean(axis=0)),
    )


@dataclass
class ExperimentResult:
    config: TrialConfig
    curves: RmseCurves
    per_graph_curves: list
    adjacencies: list
    diagnostics: dict
    series: list

    @property
    def n_trials(self) -> int:
        return len(self.series)


def _worker(args):
    config_dict, seed, adjacency = args
    config = TrialConfig.from_dict(config_dict)
    adj = None if adjacency is None else np.asarray(adjacency, dtype=bool)
    return run_trial(config, seed, adj)


def _worker_count(workers: Optional[int]) -> int:
    env = os.environ.get("BISECTNET_THREADS")
    if env:
        return max(1, int(env))
    return max(1, int(workers)) if workers else 1


def run_experiment(config: TrialConfig, workers: Optional[int] = None) -> ExperimentResult:
    """Run the full graph ensemble; deterministic in the master seed only.

    Worker count (argument or BISECTNET_THREADS) affects wall time, never
    results: every trial is a pure function of its named seed, and pooling
    happens in trial order.
    """
    adjacencies = []
    for g in range(config.graph_samples):
        if config.num_agents == 1:
            adjacencies.append(None)
        else:
            spec = GraphSpec(config.num_agents, config.edge_prob, graph_seed(config.master_seed, g))
            adjacencies.append(sample_er_irreducible(spec))

    jobs = [
        (config.to_dict(), trial_seed(config.master_seed, g, t), adjacencies[g])
        for g in range(config.graph_samples)
        for t in range(config.trials_per_graph)
    ]
    n = _worker_count(workers)
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            series = list(pool.map(_worker, jobs, chunksize=max(1, len(jobs) // (4 * n))))
    else:
        series = [_worker(job) for job in jobs]

    curves = aggregate_rmse(series, config.estimator)
    per_graph = [
        aggregate_rmse(
            series[g * config.trials_per_graph:(g + 1) * config.trials_per_graph],
            config.estimator,
        )
        for g in range(config.graph_samples)
    ]
    diagnostics = {
        "max_bisect_residual": float(max(s.bisect_residual.max() for s in series)),
        "max_mass_residual": float(max(s.mass_residual.max() for s in series)),
        "max_segments": int(max(s.segments.max() for s in series)),
        "trials": len(series),
    }
    return ExperimentResult(config, curves, per_graph, adjacencies, diagnostics, series)


def _float_repr(x: float) -> str:
    return repr(float(x))


def write_results(result: ExperimentResult, out_dir) -> dict:
    """Emit curves.csv, result.json and (when beliefs were recorded)
    trace.jsonl under ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    curves_path = out / "curves.csv"
    with open(curves_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "rmse_min", "rmse_avg", "rmse_max"])
        c = result.curves
        for k in range(c.iteration.size):
            writer.writerow([
                int(c.iteration[k]),
                _float_repr(c.rmse_min[k]),
                _float_repr(c.rmse_avg[k]),
                _float_repr(c.rmse_max[k]),
            ])
    paths["curves"] = curves_path

    doc = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "config": result.config.to_dict(),
        "config_hash": result.config.config_hash(),
        "master_seed": result.config.master_seed,
        "trials": result.n_trials,
        "adjacencies": [
            None if a is None else np.asarray(a, dtype=int).tolist()
            for a in result.adjacencies
        ],
        "diagnostics": result.diagnostics,
        "final_rmse": {
            "min": float(result.curves.rmse_min[-1]),
            "avg": float(result.curves.rmse_avg[-1]),
            "max": float(result.curves.rmse_max[-1]),
        },
        "per_graph_final_rmse_avg": [
            float(c.rmse_avg[-1]) for c in result.per_graph_curves
        ],
    }
    result_path = out / "result.json"
    with open(result_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["result"] = result_path

    if result.config.record_beliefs:
        trace_path = out / "trace.jsonl"
        with open(trace_path, "w") as fh:
            for idx, s in enumerate(result.series):
                g, t = divmod(idx, result.config.trials_per_graph)
                for row in range(s.n_iterations):
                    rec = {
                        "graph": g,
                        "trial": t,
                        "iteration": int(s.iterations[row]),
                        "query_points": s.query_points[row].tolist(),
                        "responses": s.responses[row].tolist(),
                        "est_mean": s.est_mean[row].tolist(),
                        "est_median": s.est_median[row].tolist(),
                    }
                    if s.beliefs is not None:
                        bp, values = s.beliefs[row]
                        rec["beliefs"] = [
                            {"breakpoints": bp.tolist(), "values": values[i].tolist()}
                            for i in range(values.shape[0])
                        ]
                    fh.write(json.dumps(rec) + "\n")
        paths["trace"] = trace_path
    return paths


def read_curves(path) -> RmseCurves:
    """Parse curves.csv back; exact round-trip of the written doubles."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["iteration", "rmse_min", "rmse_avg", "rmse_max"]:
        raise ValueError(f"unexpected header in {path}: {rows[0]}")
    data = np.array([[float(x) for x in row] for row in rows[1:]])
    return RmseCurves(
        iteration=data[:, 0].astype(np.int64),
        rmse_min=data[:, 1],
        rmse_avg=data[:, 2],
        rmse_max=data[:, 3],
    )


def load_config(path) -> TrialConfig:
    with open(path) as fh:
        return TrialConfig.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# minimal structural schema validation (type / required / properties / items)
# ---------------------------------------------------------------------------

_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "integer": int,
    "number": (int, float),
    "boolean": bool,
    "null": type(None),
}


def schema_errors(obj, schema, path: str = "$") -> list:
    """Validate ``obj`` against a small JSON-schema subset; returns messages."""
    errors = []
    stype = schema.get("type")
    if stype is not None:
        allowed = stype if isinstance(stype, list) else [stype]
        ok = any(
            isinstance(obj, _TYPES[t]) and not (t in ("integer", "number") and isinstance(obj, bool))
            for t in allowed
        )
        if not ok:
            errors.append(f"{path}: expected {stype}, got {type(obj).__name__}")
            return errors
    if "enum" in schema and obj not in schema["enum"]:
        errors.append(f"{path}: {obj!r} not one of {schema['enum']}")
    if isinstance(obj, dict):
        for key in schema.get("required", []):
            if key not in obj:
                errors.append(f"{path}: missing required key {key!r}")
        for key, sub in schema.get("properties", {}).items():
            if key in obj:
                errors.extend(schema_errors(obj[key], sub, f"{path}.{key}"))
    if isinstance(obj, list) and "items" in schema:
        for i, item in enumerate(obj):
            errors.extend(schema_errors(item, schema["items"], f"{path}[{i}]"))
    return errors


def load_schema(name: str) -> dict:
    here = Path(__file__).parent / "schemas" / name
    with open(here) as fh:
        return json.load(fh)
