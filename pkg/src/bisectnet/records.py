"""Run configuration and per-trial metric records.

These are the data contracts between the protocol engine, the experiment
orchestrator and the result writers.  A TrialConfig is a plain immutable
value; MetricSeries holds one trial's per-iteration, per-agent measurements
plus enough provenance to reproduce the trial exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .belief import DEFAULT_MAX_SEGMENTS, ITERATION_CAP

DEFAULT_TRUE_STATE = 0.618034
UNIFORM_TRUE_STATE = "uniform-per-trial"

MODES = ("decentralized", "centralized", "no_sharing")
ESTIMATORS = ("mean", "median")


@dataclass(frozen=True)
class TrialConfig:
    """Everything needed to reproduce an experiment, JSON-round-trippable."""

    num_agents: int
    iterations: int
    epsilons: tuple
    self_reliances: tuple
    edge_prob: float = 0.5
    graph_samples: int = 1
    trials_per_graph: int = 1
    true_state: object = DEFAULT_TRUE_STATE
    estimator: str = "mean"
    mode: str = "decentralized"
    consensus_b_grid: tuple = ()
    master_seed: int = 0
    simplify_value_tol: float = 0.0
    simplify_max_segments: int = DEFAULT_MAX_SEGMENTS
    record_beliefs: bool = False

    def __post_init__(self):
        m = self.num_agents
        if m < 1:
            raise ValueError("num_agents must be >= 1")
        if not 1 <= self.iterations <= ITERATION_CAP:
            raise ValueError(f"iterations must lie in [1, {ITERATION_CAP}]")
        if len(self.epsilons) != m or len(self.self_reliances) != m:
            raise ValueError("epsilons and self_reliances must have one entry per agent")
        if any(not 0.0 < e < 0.5 for e in self.epsilons):
            raise ValueError("all epsilons must lie in (0, 0.5)")
        if any(not 0.0 < s <= 1.0 for s in self.self_reliances):
            raise ValueError("all self-reliances must lie in (0, 1]")
        if m > 1 and any(s >= 1.0 for s in self.self_reliances):
            raise ValueError("self-reliances must be < 1 when there are neighbors")
        if not 0.0 < self.edge_prob < 1.0:
            raise ValueError("edge_prob must lie in (0, 1)")
        if self.graph_samples < 1 or self.trials_per_graph < 1:
            raise ValueError("graph_samples and trials_per_graph must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if isinstance(self.true_state, str):
            if self.true_state != UNIFORM_TRUE_STATE:
                raise ValueError(f"true_state string must be {UNIFORM_TRUE_STATE!r}")
        elif not 0.0 <= float(self.true_state) <= 1.0:
            raise ValueError("fixed true_state must lie in [0, 1]")
        if any(not 0.0 <= b <= 1.0 for b in self.consensus_b_grid):
            raise ValueError("consensus_b_grid entries must lie in [0, 1]")

    @classmethod
    def from_dict(cls, raw: dict) -> "TrialConfig":
        """Build from a JSON object, expanding the reliable/unreliable shorthands."""
        d = dict(raw)
        m = int(d["num_agents"])
        eps = d.get("epsilons")
        if isinstance(eps, dict):
            k = int(eps["num_reliable"])
            eps = [float(eps["eps_reliable"])] * k + [float(eps["eps_unreliable"])] * (m - k)
        d["epsilons"] = tuple(float(e) for e in eps)
        rel = d.get("self_reliances")
        if isinstance(rel, dict):
            reliable = float(rel.get("reliable", 0.95))
            unreliable = float(rel.get("unreliable", 0.6))
            k = _leading_reliable_count(d["epsilons"])
            rel = [reliable] * k + [unreliable] * (m - k)
        elif isinstance(rel, (int, float)):
            rel = [float(rel)] * m
        d["self_reliances"] = tuple(float(s) for s in rel)
        simp = d.pop("simplify", None)
        if simp is not None:
            d["simplify_value_tol"] = float(simp.get("value_tol", 0.0))
            d["simplify_max_segments"] = int(simp.get("max_segments", DEFAULT_MAX_SEGMENTS))
        if "consensus_b_grid" in d and d["consensus_b_grid"] is not None:
            d["consensus_b_grid"] = tuple(float(b) for b in d["consensus_b_grid"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "num_agents": self.num_agents,
            "iterations": self.iterations,
            "epsilons": list(self.epsilons),
            "self_reliances": list(self.self_reliances),
            "edge_prob": self.edge_prob,
            "graph_samples": self.graph_samples,
            "trials_per_graph": self.trials_per_graph,
            "true_state": self.true_state,
            "estimator": self.estimator,
            "mode": self.mode,
            "consensus_b_grid": list(self.consensus_b_grid),
            "master_seed": self.master_seed,
            "simplify": {
                "value_tol": self.simplify_value_tol,
                "max_segments": self.simplify_max_segments,
            },
            "record_beliefs": self.record_beliefs,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _leading_reliable_count(epsilons) -> int:
    """Length of the leading block of minimum-eps agents (the reliable ones)."""
    if len(set(epsilons)) <= 1:
        return 0
    lo = min(epsilons)
    k = 0
    for e in epsilons:
        if e != lo:
            break
        k += 1
    return k


@dataclass
class MetricSeries:
    """Per-iteration, per-agent records of one trial.

    Row t (0-based) describes the state after step t+1.  ``query_points[t]``
    are the medians actually queried during that step; ``est_median[t]`` is
    the median of the post-step belief (the next query point), matching the
    instantaneous squared error convention that scores the query point.
    Squared-error columns exist for both estimators regardless of which one
    an experiment aggregates.
    """

    iterations: np.ndarray          # (T,) 1-based iteration index
    query_points: np.ndarray        # (T, M)
    responses: np.ndarray           # (T, M) int8
    est_mean: np.ndarray            # (T, A) A = agents tracked (1 for centralized)
    est_median: np.ndarray          # (T, A)
    se_mean: np.ndarray             # (T, A)
    se_median: np.ndarray           # (T, A)
    log2_density_at_true: np.ndarray  # (T, A), -inf where the belief vanishes
    bisect_residual: np.ndarray     # (T,) max_i |P_i([0, x_i]) - 1/2|
    mass_residual: np.ndarray       # (T,) max_i |total mass - 1|
    true_state: float
    seed: int
    config_hash: str
    mode: str
    cdf_at_b: Optional[np.ndarray] = None      # (T, A, B) for the b grid
    b_grid: tuple = ()
    adjacency: Optional[np.ndarray] = None     # (M, M) bool
    beliefs: Optional[list] = None             # per-iteration list of (bp, values-matrix)
    segments: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_iterations(self) -> int:
        return int(self.iterations.size)

    @property
    def n_agents(self) -> int:
        return int(self.est_mean.shape[1])

    def se(self, estimator: str) -> np.ndarray:
        if estimator == "mean":
            return self.se_mean
        if estimator == "median":
            return self.se_median
        raise ValueError(f"estimator must be one of {ESTIMATORS}")

    def validate(self) -> None:
        t = self.n_iterations
        for name in ("query_points", "responses", "est_mean", "est_median",
                     "se_mean", "se_median", "log2_density_at_true"):
            arr = getattr(self, name)
            if arr.shape[0] != t:
                raise ValueError(f"{name} has {arr.shape[0]} records, expected {t}")
        if np.any(self.se_mean < 0.0) or np.any(self.se_median < 0.0):
            raise ValueError("squared errors must be nonnegative")


@dataclass(frozen=True)
class RmseCurves:
    """Min/avg/max root-mean-square error curves indexed by iteration."""

    iteration: np.ndarray
    rmse_min: np.ndarray
    rmse_avg: np.ndarray
    rmse_max: np.ndarray
