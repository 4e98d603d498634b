"""Decentralized noisy 20-questions target localization.

Agents hold piecewise-constant beliefs over [0, 1], query the median of their
own belief, hear noisy binary answers, and average beliefs with neighbors
through a row-stochastic interaction matrix.  The package provides the exact
belief algebra, the synchronous protocol engine with a centralized baseline,
enumeration-based verification of the protocol's structural identities, and
a seeded Monte-Carlo experiment harness with RMSE aggregation.
"""

from .belief import (
    PiecewiseDensity,
    bayes_bsc_update,
    bisect,
    mix,
    simplify,
    uniform_prior,
)
from .channel import (
    ChannelSpec,
    binary_entropy_bits,
    capacity_bits,
    observation_pmf,
    phi,
    pmf_f,
    sample_response,
)
from .diagnostics import (
    DiagnosticReport,
    check_bisection_identity,
    check_innovation_zero_mean,
    check_martingale,
    check_mgf_cosh,
    check_response_marginal,
    check_vbound,
    consensus_monitor,
    dynamic_range,
    innovation,
    log_posterior_growth,
    lse_bounds,
    random_reachable_state,
    run_invariant_suite,
)
from .experiment import (
    ExperimentResult,
    aggregate_rmse,
    read_curves,
    run_experiment,
    write_results,
)
from .network import (
    GraphSpec,
    InteractionMatrix,
    contraction_power,
    is_strongly_connected,
    left_perron,
    sample_er_irreducible,
    tau1,
    validate,
    weights_from_graph,
)
from .protocol import (
    AgentState,
    NetworkState,
    bisect_phase,
    centralized_step,
    decentralized_step,
    fuse_phase,
    initial_state,
    respond_phase,
    run_centralized_trial,
    run_decentralized_trial,
    run_no_sharing_trial,
    run_trial,
)
from .records import MetricSeries, RmseCurves, TrialConfig

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "ChannelSpec",
    "DiagnosticReport",
    "ExperimentResult",
    "GraphSpec",
    "InteractionMatrix",
    "MetricSeries",
    "NetworkState",
    "PiecewiseDensity",
    "RmseCurves",
    "TrialConfig",
    "aggregate_rmse",
    "bayes_bsc_update",
    "binary_entropy_bits",
    "bisect",
    "bisect_phase",
    "capacity_bits",
    "centralized_step",
    "check_bisection_identity",
    "check_innovation_zero_mean",
    "check_martingale",
    "check_mgf_cosh",
    "check_response_marginal",
    "check_vbound",
    "consensus_monitor",
    "contraction_power",
    "decentralized_step",
    "dynamic_range",
    "fuse_phase",
    "initial_state",
    "innovation",
    "is_strongly_connected",
    "left_perron",
    "log_posterior_growth",
    "lse_bounds",
    "mix",
    "observation_pmf",
    "phi",
    "pmf_f",
    "random_reachable_state",
    "read_curves",
    "respond_phase",
    "run_centralized_trial",
    "run_decentralized_trial",
    "run_experiment",
    "run_invariant_suite",
    "run_no_sharing_trial",
    "run_trial",
    "sample_er_irreducible",
    "sample_response",
    "simplify",
    "tau1",
    "uniform_prior",
    "validate",
    "weights_from_graph",
    "write_results",
]
