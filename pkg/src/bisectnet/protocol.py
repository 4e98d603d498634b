"""The decentralized query/share protocol and its centralized baseline.

One synchronous round has three network-wide phases:

  1. every agent bisects its own belief at the median and asks whether the
     target lies left of that point;
  2. every agent receives a noisy binary answer through its own channel;
  3. every agent Bayes-updates its own belief with the answer, then replaces
     it by the row-weighted average of the updated own belief and the
     neighbors' pre-update beliefs.

All agents' beliefs live on a shared breakpoint grid, so phase 3 is a single
matrix product of the interaction matrix with the stacked segment heights.
The Bayes step divides by the realized normalizer (the likelihood integral),
which equals one half exactly while the median split is representable; this
keeps total mass exact even when a belief has concentrated beyond the
resolution of double-precision breakpoints.

The centralized baseline maintains one posterior and performs the agents'
bisections sequentially within each outer iteration, which matches the
jointly optimal centralized scheme in average performance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import belief as bl
from . import seeding
from .belief import DEFAULT_MAX_SEGMENTS, MIN_SEGMENT_WIDTH, PiecewiseDensity
from .channel import ChannelSpec
from .errors import ProtocolError
from .network import (
    InteractionMatrix,
    is_closed_component_union,
    is_strongly_connected,
    validate,
)
from .records import UNIFORM_TRUE_STATE, MetricSeries, TrialConfig

_DEGENERATE_MASS = 1e-12


@dataclass(frozen=True)
class AgentState:
    """One agent's belief, channel, and the query/answer of the last step."""

    belief: PiecewiseDensity
    channel: ChannelSpec
    last_query_point: Optional[float] = None
    last_response: Optional[int] = None


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Beliefs of all agents plus the interaction matrix and iteration count.

    The matrix must be row-stochastic with a strictly positive diagonal and
    strongly connected; pass ``strict=False`` to instead allow a disjoint
    union of closed strongly connected subnetworks.
    """

    agents: tuple
    matrix: InteractionMatrix
    true_state: float
    iteration: int = 0
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if self.matrix.size != len(self.agents):
            raise ValueError("matrix size does not match the number of agents")
        if not validate(self.matrix):
            raise ValueError("interaction matrix is not row-stochastic/nonnegative")
        if np.any(np.diag(self.matrix.entries) <= 0.0):
            raise ValueError("all self-reliances must be strictly positive")
        if self.strict:
            if not is_strongly_connected(self.matrix):
                raise ValueError("interaction matrix is not strongly connected")
        elif not is_closed_component_union(self.matrix):
            raise ValueError("matrix is not a union of closed strongly "
                             "connected components")
        if not 0.0 <= self.true_state <= 1.0:
            raise ValueError("true state must lie in [0, 1]")

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    def epsilons(self) -> np.ndarray:
        return np.array([a.channel.eps for a in self.agents])

    def query_points(self) -> np.ndarray:
        if any(a.last_query_point is None for a in self.agents):
            raise ProtocolError("query points not set; run the bisect phase first")
        return np.array([a.last_query_point for a in self.agents])

    def responses(self) -> np.ndarray:
        if any(a.last_response is None for a in self.agents):
            raise ProtocolError("responses not set; run the respond phase first")
        return np.array([a.last_response for a in self.agents], dtype=np.int8)


def initial_state(
    matrix: InteractionMatrix,
    epsilons: Sequence[float],
    true_state: float,
    prior: Optional[PiecewiseDensity] = None,
    strict: bool = True,
) -> NetworkState:
    """Fresh network with every agent holding the (default uniform) prior."""
    prior = prior if prior is not None else bl.uniform_prior()
    agents = tuple(AgentState(prior, ChannelSpec(float(e))) for e in epsilons)
    return NetworkState(agents, matrix, float(true_state), 0, strict)


# ---------------------------------------------------------------------------
# shared-grid kernels
# ---------------------------------------------------------------------------


def _grid_of(state: NetworkState):
    """Stack all beliefs onto their union breakpoint grid."""
    bps = [a.belief.breakpoints for a in state.agents]
    shared = all(b is bps[0] or (b.size == bps[0].size and np.array_equal(b, bps[0]))
                 for b in bps[1:])
    if shared:
        grid = bps[0]
        values = np.vstack([a.belief.values for a in state.agents])
    else:
        grid = np.unique(np.concatenate(bps))
        values = np.vstack(
            [bl._expand_to_grid(a.belief.breakpoints, a.belief.values, grid)
             for a in state.agents]
        )
    return grid, values


def _medians_with_info(bp: np.ndarray, values: np.ndarray):
    """Per-row medians on a shared grid.

    Returns (xhats, segments, in-segment masses, interior flags); an agent is
    interior when its median is representable strictly inside a segment, so
    the exact half-mass split can be realized.
    """
    masses = values * np.diff(bp)
    cum = np.cumsum(masses, axis=1)
    m = values.shape[0]
    xhats = np.empty(m)
    segs = np.empty(m, dtype=np.int64)
    insides = np.empty(m)
    interior = np.zeros(m, dtype=bool)
    for i in range(m):
        x, k, inside = bl._quantile_from_cum(bp, values[i], masses[i], cum[i], 0.5)
        xhats[i] = x
        segs[i] = k
        insides[i] = inside
        interior[i] = bp[k] < x < bp[k + 1]
    return xhats, segs, insides, interior, masses


def _refine_snap(bp, values, xhats, segs, insides, interior, masses):
    """Insert the interior medians into the grid.

    Every row's height simply duplicates across a split except in the row
    whose own median caused it: there the two pieces get the heights that
    realize the exact half-mass split.
    """
    new_points = np.unique(xhats[interior])
    if new_points.size == 0:
        return bp, values.copy()
    # interior medians are strictly inside a segment, never existing breakpoints
    grid = np.insert(bp, np.searchsorted(bp, new_points), new_points)
    col = np.searchsorted(bp, grid[:-1], side="right") - 1
    out = values[:, col]
    for i in np.flatnonzero(interior):
        k = segs[i]
        a, b = bp[k], bp[k + 1]
        c0 = np.searchsorted(grid, a, side="left")
        cx = np.searchsorted(grid, xhats[i], side="left")
        c1 = np.searchsorted(grid, b, side="left")
        out[i, c0:cx] = insides[i] / (xhats[i] - a)
        out[i, cx:c1] = (masses[i, k] - insides[i]) / (b - xhats[i])
    return grid, out


def _left_fraction(bp, values, xhats):
    """Per-row mass fraction of [0, x_hat_i]; x_hat values must be grid points."""
    masses = values * np.diff(bp)
    cum = np.cumsum(masses, axis=1)
    totals = cum[:, -1]
    pos = np.searchsorted(bp, xhats)
    rows = np.arange(values.shape[0])
    left = np.where(pos > 0, cum[rows, np.maximum(pos - 1, 0)], 0.0)
    return left / totals, totals


def _bayes_rows(bp, values, xhats, responses, eps, u):
    """Exact Bayes update of every row given its own query and answer.

    The per-row normalizer is the realized likelihood integral
    f1 * u + f0 * (1 - u); it equals one half exactly under an exact
    median split.
    """
    y = np.asarray(responses)
    f_left = np.where(y == 1, 1.0 - eps, eps)
    f_right = np.where(y == 1, eps, 1.0 - eps)
    z_norm = f_left * u + f_right * (1.0 - u)
    inside = bp[1:][None, :] <= xhats[:, None]
    factors = np.where(inside, (f_left / z_norm)[:, None], (f_right / z_norm)[:, None])
    return values * factors


def _fuse_values(entries, updated, pre):
    """Row-stochastic combination: own updated belief plus neighbor beliefs."""
    a_diag = np.diag(entries)
    a_off = entries.copy()
    np.fill_diagonal(a_off, 0.0)
    return a_off @ pre + a_diag[:, None] * updated


def _simplify_grid(bp, values, value_tol, max_segments):
    """Network-wide segment-count control on the shared grid."""
    n_seg = values.shape[1]
    if n_seg > 1:
        widths = np.diff(bp)
        col_mass = (values * widths).max(axis=0)
        tiny = (widths < MIN_SEGMENT_WIDTH) & (col_mass <= _DEGENERATE_MASS)
        drop = tiny[:-1].copy()
        if tiny[-1]:
            drop[-1] = True
        if value_tol > 0.0:
            left, right = values[:, :-1], values[:, 1:]
            scale = np.maximum(np.maximum(left, right), 1e-300)
            drop |= np.all(np.abs(left - right) <= value_tol * scale, axis=0)
        if np.any(drop):
            keep = np.concatenate(([True], ~drop, [True]))
            starts = np.flatnonzero(keep[:-1])
            masses = values * widths
            new_bp = bp[keep]
            new_m = np.add.reduceat(masses, starts, axis=1)
            bp, values = new_bp, new_m / np.diff(new_bp)
    if values.shape[1] > max_segments:
        grid = np.linspace(0.0, 1.0, max_segments + 1)
        cum = np.concatenate(
            (np.zeros((values.shape[0], 1)), np.cumsum(values * np.diff(bp), axis=1)),
            axis=1,
        )
        new_v = np.empty((values.shape[0], max_segments))
        for i in range(values.shape[0]):
            new_v[i] = np.diff(np.interp(grid, bp, cum[i])) / np.diff(grid)
        bp, values = grid, new_v
    return bp, values


# ---------------------------------------------------------------------------
# public phase operations
# ---------------------------------------------------------------------------


def bisect_phase(state: NetworkState) -> NetworkState:
    """Phase 1: every agent splits its belief at the median and fixes its query."""
    agents = []
    for i, ag in enumerate(state.agents):
        try:
            xhat, refined = bl.bisect(ag.belief)
        except Exception as exc:
            raise ProtocolError(f"agent {i}: cannot bisect belief: {exc}") from exc
        agents.append(replace(ag, belief=refined, last_query_point=xhat,
                              last_response=None))
    return replace(state, agents=tuple(agents))


def respond_phase(state: NetworkState, rng=None, responses=None) -> NetworkState:
    """Phase 2: noisy answers, one uniform draw per agent in index order."""
    xhats = state.query_points()
    if responses is not None:
        y = [int(b) for b in responses]
        if len(y) != state.num_agents or any(b not in (0, 1) for b in y):
            raise ValueError("responses must be one bit per agent")
    elif rng is not None:
        y = []
        for i, ag in enumerate(state.agents):
            z = 1 if state.true_state <= xhats[i] else 0
            y.append(z ^ (1 if rng.random() < ag.channel.eps else 0))
    else:
        raise ValueError("need either rng or forced responses")
    agents = tuple(replace(ag, last_response=y[i]) for i, ag in enumerate(state.agents))
    return replace(state, agents=agents)


def fuse_phase(
    state: NetworkState,
    value_tol: float = 0.0,
    max_segments: int = DEFAULT_MAX_SEGMENTS,
) -> NetworkState:
    """Phase 3: Bayes-update own beliefs, average with neighbors, advance time."""
    xhats = state.query_points()
    y = state.responses()
    eps = state.epsilons()
    bp, pre = _grid_of(state)
    u, _ = _left_fraction(bp, pre, xhats)
    updated = _bayes_rows(bp, pre, xhats, y, eps, u)
    fused = _fuse_values(state.matrix.entries, updated, pre)
    bp, fused = _simplify_grid(bp, fused, value_tol, max_segments)
    agents = tuple(
        replace(ag, belief=PiecewiseDensity(bp, fused[i]))
        for i, ag in enumerate(state.agents)
    )
    return replace(state, agents=agents, iteration=state.iteration + 1)


def decentralized_step(
    state: NetworkState,
    rng=None,
    responses=None,
    value_tol: float = 0.0,
    max_segments: int = DEFAULT_MAX_SEGMENTS,
) -> NetworkState:
    """One full synchronous round: bisect, respond, fuse."""
    s = bisect_phase(state)
    s = respond_phase(s, rng=rng, responses=responses)
    return fuse_phase(s, value_tol=value_tol, max_segments=max_segments)


def centralized_step(
    posterior: PiecewiseDensity,
    channels: Sequence[ChannelSpec],
    true_state: float,
    rng,
) -> PiecewiseDensity:
    """One outer iteration of the centralized baseline.

    Bisects the shared posterior once per agent in index order, feeding each
    answer back before the next query.
    """
    bp = posterior.breakpoints
    values = posterior.values[None, :]
    for ch in channels:
        xh, segs, insides, interior, masses = _medians_with_info(bp, values)
        bp, values = _refine_snap(bp, values, xh, segs, insides, interior, masses)
        z = 1 if true_state <= xh[0] else 0
        y = z ^ (1 if rng.random() < ch.eps else 0)
        u, _ = _left_fraction(bp, values, xh)
        values = _bayes_rows(bp, values, xh, [y], np.array([ch.eps]), u)
    return PiecewiseDensity(bp, values[0])


# ---------------------------------------------------------------------------
# trial runners
# ---------------------------------------------------------------------------


def resolve_true_state(config: TrialConfig, trial_seed: int) -> float:
    if config.true_state == UNIFORM_TRUE_STATE:
        return seeding.unit_from_key(trial_seed, seeding.TAG_XSTAR)
    return float(config.true_state)


def _measure(bp, values, true_state, b_grid):
    """Per-agent summary of a belief matrix plus the next-step median info.

    One masses/cumsum pass serves both the per-iteration metrics (mean,
    median, height at the target, CDF values on the consensus grid) and the
    split data the next bisection needs.
    """
    widths = np.diff(bp)
    masses = values * widths
    cum = np.cumsum(masses, axis=1)
    totals = cum[:, -1]
    mids = 0.5 * (bp[:-1] + bp[1:])
    est_mean = (masses @ mids) / totals
    m = values.shape[0]
    medians = np.empty(m)
    segs = np.empty(m, dtype=np.int64)
    insides = np.empty(m)
    interior = np.zeros(m, dtype=bool)
    for i in range(m):
        x, k, inside = bl._quantile_from_cum(bp, values[i], masses[i], cum[i], 0.5)
        medians[i] = x
        segs[i] = k
        insides[i] = inside
        interior[i] = bp[k] < x < bp[k + 1]
    k = min(int(np.searchsorted(bp, true_state, side="right")) - 1, values.shape[1] - 1)
    with np.errstate(divide="ignore"):
        log2_at_true = np.log2(values[:, k])
    cdf_b = None
    if len(b_grid):
        cdf_b = np.empty((m, len(b_grid)))
        for j, b in enumerate(b_grid):
            c = min(int(np.searchsorted(bp, b, side="right")) - 1, values.shape[1] - 1)
            before = cum[:, c - 1] if c > 0 else np.zeros(m)
            cdf_b[:, j] = before + values[:, c] * (b - bp[c])
    split = (medians, segs, insides, interior, masses)
    return est_mean, medians, log2_at_true, cdf_b, totals, split


def _alloc_series(config: TrialConfig, n_tracked: int, trial_seed: int,
                  true_state: float, adjacency) -> MetricSeries:
    t, m = config.iterations, config.num_agents
    nb = len(config.consensus_b_grid)
    return MetricSeries(
        iterations=np.arange(1, t + 1),
        query_points=np.zeros((t, m)),
        responses=np.zeros((t, m), dtype=np.int8),
        est_mean=np.zeros((t, n_tracked)),
        est_median=np.zeros((t, n_tracked)),
        se_mean=np.zeros((t, n_tracked)),
        se_median=np.zeros((t, n_tracked)),
        log2_density_at_true=np.zeros((t, n_tracked)),
        bisect_residual=np.zeros(t),
        mass_residual=np.zeros(t),
        true_state=true_state,
        seed=trial_seed,
        config_hash=config.config_hash(),
        mode=config.mode,
        cdf_at_b=np.zeros((t, n_tracked, nb)) if nb else None,
        b_grid=tuple(config.consensus_b_grid),
        adjacency=None if adjacency is None else np.asarray(adjacency, dtype=bool),
        beliefs=[] if config.record_beliefs else None,
        segments=np.zeros(t, dtype=np.int64),
    )


def _run_shared_grid(config: TrialConfig, trial_seed: int, entries: np.ndarray,
                     eps: np.ndarray, adjacency, agent_offset: int = 0,
                     series: Optional[MetricSeries] = None,
                     column: Optional[int] = None) -> MetricSeries:
    """Synchronous-round engine on the shared grid.

    With ``column`` set, records land in that single column of ``series``
    (used to assemble independent per-agent runs).
    """
    m = entries.shape[0]
    true_state = resolve_true_state(config, trial_seed)
    if series is None:
        series = _alloc_series(config, m, trial_seed, true_state, adjacency)
    cols = slice(None) if column is None else slice(column, column + 1)

    bp = np.array([0.0, 1.0])
    values = np.ones((m, 1))
    a_diag = np.diag(entries).copy()
    a_off = entries.copy()
    np.fill_diagonal(a_off, 0.0)
    all_uniforms = seeding.response_block(trial_seed, config.iterations, m,
                                          offset=agent_offset)

    xh, segs, insides, interior, masses = _medians_with_info(bp, values)
    for t in range(1, config.iterations + 1):
        bp, values = _refine_snap(bp, values, xh, segs, insides, interior, masses)
        u, totals = _left_fraction(bp, values, xh)
        uniforms = all_uniforms[t - 1]
        z = (true_state <= xh).astype(np.int8)
        y = z ^ (uniforms < eps).astype(np.int8)
        updated = _bayes_rows(bp, values, xh, y, eps, u)
        values = a_off @ values + a_diag[:, None] * updated
        bp, values = _simplify_grid(
            bp, values, config.simplify_value_tol, config.simplify_max_segments
        )
        if not np.all(np.isfinite(values)):
            raise ProtocolError(f"belief heights overflowed at iteration {t}")

        row = t - 1
        est_mean, medians, log2_at_true, cdf_b, new_totals, split = _measure(
            bp, values, true_state, config.consensus_b_grid
        )
        series.query_points[row, cols] = xh
        series.responses[row, cols] = y
        series.est_mean[row, cols] = est_mean
        series.est_median[row, cols] = medians
        series.se_mean[row, cols] = (est_mean - true_state) ** 2
        series.se_median[row, cols] = (medians - true_state) ** 2
        series.log2_density_at_true[row, cols] = log2_at_true
        series.bisect_residual[row] = max(
            series.bisect_residual[row], float(np.max(np.abs(u - 0.5)))
        )
        series.mass_residual[row] = max(
            series.mass_residual[row], float(np.max(np.abs(new_totals - 1.0)))
        )
        if cdf_b is not None:
            series.cdf_at_b[row, cols, :] = cdf_b
        series.segments[row] = max(series.segments[row], values.shape[1])
        if series.beliefs is not None and column is None:
            series.beliefs.append((bp.copy(), values.copy()))

        xh, segs, insides, interior, masses = split
    return series


def run_decentralized_trial(config: TrialConfig, seed: int,
                            adjacency=None) -> MetricSeries:
    """One seeded trial of the sharing protocol; deterministic given the seed.

    ``adjacency`` defaults to the complete graph; pass a sampled one for
    ensemble experiments.
    """
    from .network import complete_adjacency, weights_from_graph

    m = config.num_agents
    if m == 1:
        entries = np.array([[1.0]])
        adjacency = None
    else:
        if adjacency is None:
            adjacency = complete_adjacency(m)
        entries = weights_from_graph(adjacency, config.self_reliances).entries
    eps = np.asarray(config.epsilons)
    return _run_shared_grid(config, seed, entries, eps, adjacency)


def run_no_sharing_trial(config: TrialConfig, seed: int,
                         adjacency=None) -> MetricSeries:
    """Independent per-agent bisection runs (no information exchange).

    Agent i's trajectory is bit-identical to a single-agent run keyed by the
    same (seed, agent index) substream.
    """
    m = config.num_agents
    true_state = resolve_true_state(config, seed)
    series = _alloc_series(config, m, seed, true_state, adjacency)
    one = np.array([[1.0]])
    for i in range(m):
        eps = np.asarray([config.epsilons[i]])
        _run_shared_grid(config, seed, one, eps, None,
                         agent_offset=i, series=series, column=i)
    # per-agent grids do not stack into one matrix; no joint snapshots
    series.beliefs = None
    return series


def _sub_bisect_update(bp, row, eps_i, uniform, true_state):
    """Lean single-posterior bisection-and-update used by the baseline.

    Works on 1-d arrays; the left fraction is taken from the split target,
    which matches the stored masses up to one rounding of the snap.
    """
    masses = row * np.diff(bp)
    cum = np.cumsum(masses)
    total = cum[-1]
    x, k, inside = bl._quantile_from_cum(bp, row, masses, cum, 0.5)
    before = float(cum[k - 1]) if k > 0 else 0.0
    if bp[k] < x < bp[k + 1]:
        left_mass = before + inside
        bp = np.insert(bp, k + 1, x)
        row = np.insert(row, k + 1, (masses[k] - inside) / (bp[k + 2] - x))
        row[k] = inside / (x - bp[k])
        split_at = k + 1
    else:
        left_mass = before if x <= bp[k] else before + masses[k]
        split_at = k if x <= bp[k] else k + 1
    u = left_mass / total
    z = 1 if true_state <= x else 0
    y = z ^ int(uniform < eps_i)
    f1 = (1.0 - eps_i) if y == 1 else eps_i
    f0 = 1.0 - f1
    z_norm = f1 * u + f0 * (1.0 - u)
    row = row.copy() if row.base is not None else row
    row[:split_at] *= f1 / z_norm
    row[split_at:] *= f0 / z_norm
    return bp, row, x, y, u


def run_centralized_trial(config: TrialConfig, seed: int,
                          adjacency=None) -> MetricSeries:
    """Centralized baseline: one shared posterior, M bisections per iteration."""
    m = config.num_agents
    true_state = resolve_true_state(config, seed)
    series = _alloc_series(config, 1, seed, true_state, adjacency)
    eps = np.asarray(config.epsilons)
    bp = np.array([0.0, 1.0])
    row = np.ones(1)
    all_uniforms = seeding.response_block(seed, config.iterations, m)
    for t in range(1, config.iterations + 1):
        uniforms = all_uniforms[t - 1]
        rec = t - 1
        for i in range(m):
            bp, row, xh, y, u = _sub_bisect_update(
                bp, row, float(eps[i]), float(uniforms[i]), true_state
            )
            series.query_points[rec, i] = xh
            series.responses[rec, i] = y
            series.bisect_residual[rec] = max(
                series.bisect_residual[rec], float(abs(u - 0.5))
            )
        values = row[None, :]
        bp, values = _simplify_grid(
            bp, values, config.simplify_value_tol, config.simplify_max_segments
        )
        row = values[0]
        est_mean, medians, log2_at_true, cdf_b, totals, _ = _measure(
            bp, values, true_state, config.consensus_b_grid
        )
        series.est_mean[rec] = est_mean
        series.est_median[rec] = medians
        series.se_mean[rec] = (est_mean - true_state) ** 2
        series.se_median[rec] = (medians - true_state) ** 2
        series.log2_density_at_true[rec] = log2_at_true
        series.mass_residual[rec] = float(np.max(np.abs(totals - 1.0)))
        if cdf_b is not None:
            series.cdf_at_b[rec] = cdf_b
        series.segments[rec] = values.shape[1]
        if series.beliefs is not None:
            series.beliefs.append((bp.copy(), values.copy()))
    return series


_RUNNERS = {
    "decentralized": run_decentralized_trial,
    "no_sharing": run_no_sharing_trial,
    "centralized": run_centralized_trial,
}


def run_trial(config: TrialConfig, seed: int, adjacency=None) -> MetricSeries:
    """Dispatch on ``config.mode``."""
    return _RUNNERS[config.mode](config, seed, adjacency)
