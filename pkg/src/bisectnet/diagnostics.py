"""Numerical verification of the protocol's structural identities.

Under exact median bisection the response of every agent is a fair coin given
the past, the innovation part of each belief update integrates to zero in
conditional mean, and the positive-weighted vector of set probabilities is a
martingale whose innovation moment generating function is a hyperbolic
cosine.  These facts are checkable to near machine precision by exact
enumeration over the two (or 2^M joint) response values, because under
bisection each response is equally likely.  This module implements those
enumeration oracles plus the contraction/log-sum-exp envelope checks and the
consensus monitors used by experiments, and bundles them into the invariant
suite behind the ``check`` CLI subcommand.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import belief as bl
from . import seeding
from .channel import capacity_bits
from .errors import EnumerationError
from .network import GraphSpec, InteractionMatrix, left_perron, sample_er_irreducible, tau1, weights_from_graph
from .protocol import (
    NetworkState,
    bisect_phase,
    decentralized_step,
    fuse_phase,
    initial_state,
    respond_phase,
)
from .records import MetricSeries


@dataclass(frozen=True)
class DiagnosticReport:
    """Outcome of one identity check: passes iff residual <= tolerance."""

    name: str
    residual: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.residual <= self.tolerance))

    def __str__(self):
        tag = "pass" if self.passed else "FAIL"
        return f"{self.name:<28s} residual={self.residual:>12.3e} tol={self.tolerance:.1e} {tag}"


def _as_intervals(B) -> tuple:
    """Normalize a set argument: one (a, b) pair or a sequence of them."""
    if B is None:
        return ()
    if len(B) == 2 and np.isscalar(B[0]):
        return ((float(B[0]), float(B[1])),)
    return tuple((float(a), float(b)) for a, b in B)


def _ensure_bisected(state: NetworkState) -> NetworkState:
    """Bring a state to the post-bisection phase.

    A post-step state still carries the query/answer that produced it (the
    trace convention), so the queries are only trusted when the responses are
    cleared, which is how the bisect phase leaves them.  Re-bisecting is
    idempotent on genuinely fresh states.
    """
    fresh = all(
        a.last_query_point is not None and a.last_response is None
        for a in state.agents
    )
    return state if fresh else bisect_phase(state)


def _innovation_raw(density: bl.PiecewiseDensity, xhat: float, y: int,
                    a_ii: float, eps: float, intervals) -> float:
    """Innovation of one agent over a union of intervals.

    a_ii * (2 * integral_B of likelihood(y|x) * p(x) dx - P(B)), with the
    likelihood equal to f1(y) left of the query point and f0(y) right of it.
    """
    f1 = (1.0 - eps) if y == 1 else eps
    f0 = 1.0 - f1
    p_b = 0.0
    p_left = 0.0
    for a, b in intervals:
        mass = density.prob_interval(a, b)
        left = density.cdf(min(b, xhat)) - density.cdf(min(a, xhat))
        p_b += mass
        p_left += max(left, 0.0)
    p_right = p_b - p_left
    return a_ii * (2.0 * (f1 * p_left + f0 * p_right) - p_b)


def innovation(state: NetworkState, agent: int, B, y: int) -> float:
    """Data-driven deviation of agent's mass on B from its pre-update value."""
    state = _ensure_bisected(state)
    ag = state.agents[agent]
    return _innovation_raw(
        ag.belief, ag.last_query_point, y,
        float(state.matrix.entries[agent, agent]), ag.channel.eps,
        _as_intervals(B),
    )


def check_innovation_zero_mean(state: NetworkState, B,
                               tolerance: float = 1e-12) -> DiagnosticReport:
    """The innovation averages to zero over the two equally likely answers."""
    state = _ensure_bisected(state)
    worst = 0.0
    for i in range(state.num_agents):
        mean = 0.5 * (innovation(state, i, B, 1) + innovation(state, i, B, 0))
        worst = max(worst, abs(mean))
    return DiagnosticReport("innovation_zero_mean", worst, tolerance)


def check_response_marginal(state: NetworkState,
                            tolerance: float = 1e-12) -> DiagnosticReport:
    """Each answer is a fair coin given the past: P(y=1) = 1/2 exactly."""
    state = _ensure_bisected(state)
    worst = 0.0
    for ag in state.agents:
        u = ag.belief.cdf(ag.last_query_point) / ag.belief.total_mass()
        eps = ag.channel.eps
        p_one = (1.0 - eps) * u + eps * (1.0 - u)
        worst = max(worst, abs(p_one - 0.5))
    return DiagnosticReport("response_marginal", worst, tolerance)


def check_bisection_identity(state: NetworkState,
                             tolerance: float = 1e-9) -> DiagnosticReport:
    """Each agent's query splits its belief into exact halves."""
    state = _ensure_bisected(state)
    worst = 0.0
    for ag in state.agents:
        u = ag.belief.cdf(ag.last_query_point) / ag.belief.total_mass()
        worst = max(worst, abs(u - 0.5))
    return DiagnosticReport("bisection_identity", worst, tolerance)


def _weighted_mass(state: NetworkState, v: np.ndarray, intervals) -> float:
    return float(sum(
        vi * ag.belief.prob_union(intervals) for vi, ag in zip(v, state.agents)
    ))


def check_martingale(state: NetworkState, B,
                     tolerance: float = 1e-10) -> DiagnosticReport:
    """The left-fixed-vector weighting of set masses is conserved in mean.

    Enumerates all 2^M joint answers, each with probability 2^-M (exact under
    bisection), applies the full step to each, and compares the averaged
    post-step weighted mass with the pre-step one.
    """
    m = state.num_agents
    if m > 16:
        raise EnumerationError(f"2^{m} joint responses is too many; use "
                               "check_martingale_sampled")
    intervals = _as_intervals(B)
    v = left_perron(state.matrix)
    ready = _ensure_bisected(state)
    base = _weighted_mass(ready, v, intervals)
    total = 0.0
    for code in range(2 ** m):
        y = [(code >> i) & 1 for i in range(m)]
        nxt = fuse_phase(respond_phase(ready, responses=y))
        total += _weighted_mass(nxt, v, intervals)
    return DiagnosticReport("weighted_mass_martingale",
                            abs(total / 2 ** m - base), tolerance)


def check_martingale_sampled(state: NetworkState, B, n_samples: int,
                             seed: int = 0) -> DiagnosticReport:
    """Monte-Carlo martingale check for networks too large to enumerate.

    Samples joint answers from the conditional response law (independent fair
    bits under exact bisection, the same weights the enumeration uses).  The
    tolerance is four standard errors of the sampled mean.
    """
    intervals = _as_intervals(B)
    v = left_perron(state.matrix)
    ready = _ensure_bisected(state)
    base = _weighted_mass(ready, v, intervals)
    m = ready.num_agents
    vals = np.empty(n_samples)
    for s in range(n_samples):
        y = [int(seeding.unit_from_key(seed, seeding.TAG_RESPONSE, s, i) < 0.5)
             for i in range(m)]
        nxt = fuse_phase(respond_phase(ready, responses=y))
        vals[s] = _weighted_mass(nxt, v, intervals)
    stderr = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 1.0
    return DiagnosticReport("weighted_mass_martingale_mc",
                            abs(float(vals.mean()) - base), 4.0 * stderr + 1e-12)


def check_mgf_cosh(state: NetworkState, agent: int, b: float, k: float,
                   tolerance: float = 1e-9) -> DiagnosticReport:
    """The innovation's conditional MGF is a hyperbolic cosine.

    E[exp(k d)] over the two answers must equal
    cosh(k * a_ii * (1 - 2 eps) * min(F(b), 1 - F(b))).
    """
    state = _ensure_bisected(state)
    ag = state.agents[agent]
    intervals = ((0.0, float(b)),)
    lhs = 0.5 * (
        math.exp(k * innovation(state, agent, intervals, 1))
        + math.exp(k * innovation(state, agent, intervals, 0))
    )
    f_b = ag.belief.cdf(b) / ag.belief.total_mass()
    mu = min(f_b, 1.0 - f_b)
    a_ii = float(state.matrix.entries[agent, agent])
    rhs = math.cosh(k * a_ii * (1.0 - 2.0 * ag.channel.eps) * mu)
    return DiagnosticReport("innovation_mgf_cosh", abs(lhs - rhs), tolerance)


def dynamic_range(state: NetworkState, B) -> float:
    """Spread across agents of the mass assigned to B."""
    intervals = _as_intervals(B)
    masses = [ag.belief.prob_union(intervals) for ag in state.agents]
    return float(max(masses) - min(masses))


def check_vbound(trace: Sequence[NetworkState], B,
                 tolerance: float = 1e-10) -> DiagnosticReport:
    """Realized-path contraction bound on the belief spread.

    Over r consecutive steps the spread of the mass on B is bounded by the
    r-step ergodicity coefficient times the initial spread plus the realized
    innovation spreads accumulated along the way.
    """
    if len(trace) < 2:
        raise ValueError("need at least two consecutive states")
    intervals = _as_intervals(B)
    r = len(trace) - 1
    entries = trace[0].matrix.entries
    power = np.linalg.matrix_power(entries, r)
    tau_r = tau1(InteractionMatrix(power))
    v_start = dynamic_range(trace[0], intervals)
    v_end = dynamic_range(trace[-1], intervals)
    spread_sum = 0.0
    for j in range(1, r + 1):
        prev, cur = trace[j - 1], trace[j]
        innov = [
            _innovation_raw(
                prev.agents[i].belief,
                cur.agents[i].last_query_point,
                int(cur.agents[i].last_response),
                float(entries[i, i]),
                prev.agents[i].channel.eps,
                intervals,
            )
            for i in range(prev.num_agents)
        ]
        spread_sum += max(innov) - min(innov)
    residual = max(0.0, v_end - (tau_r * v_start + spread_sum))
    return DiagnosticReport("dynamic_range_bound", residual, tolerance)


def lse_bounds(a, k: float) -> tuple[float, float]:
    """Slack of the log-sum-exp envelope around the maximum.

    Returns ``(smooth - max, max + log(M)/k - smooth)``; both lie in
    [0, log(M)/k].  The mirrored bounds for the minimum follow by applying
    this to the negated vector.
    """
    if k <= 0.0:
        raise ValueError("k must be positive")
    arr = np.asarray(a, dtype=np.float64)
    top = float(arr.max())
    smooth = top + math.log(float(np.exp(k * (arr - top)).sum())) / k
    bound = math.log(arr.size) / k
    return smooth - top, top + bound - smooth


@dataclass(frozen=True)
class GrowthReport:
    """Fitted growth of the weighted log-belief at the target vs. its bound."""

    slope: float
    rate_bound: float
    valid: bool


def log_posterior_growth(series: MetricSeries, matrix: InteractionMatrix,
                         epsilons: Sequence[float],
                         t_start: Optional[int] = None,
                         t_end: Optional[int] = None) -> GrowthReport:
    """Least-squares slope of the weighted log2 belief height at the target.

    Fits over iterations [t_start, t_end] (default: trailing half) and
    reports the capacity-weighted bound sum_i v_i a_ii C(eps_i) in bits per
    iteration.  ``valid`` is False when any belief vanished at the target.
    """
    v = left_perron(matrix)
    logs = series.log2_density_at_true
    t_total = logs.shape[0]
    lo = t_total // 2 if t_start is None else max(0, int(t_start) - 1)
    hi = t_total if t_end is None else min(t_total, int(t_end))
    window = logs[lo:hi]
    weighted = window @ v
    valid = bool(np.all(np.isfinite(weighted)))
    if valid and weighted.size >= 2:
        t_axis = np.asarray(series.iterations[lo:hi], dtype=np.float64)
        slope = float(np.polyfit(t_axis, weighted, 1)[0])
    else:
        slope = float("nan")
    a_diag = np.diag(matrix.entries)
    bound = float(sum(v[i] * a_diag[i] * capacity_bits(float(epsilons[i]))
                      for i in range(matrix.size)))
    return GrowthReport(slope, bound, valid)


def consensus_monitor(series: MetricSeries, b_grid=None):
    """Per-iteration spread and tail-closeness curves on the CDF grid.

    Returns ``(V, mu)`` where ``V[t, j]`` is the across-agent spread of the
    CDF at b_j and ``mu[t, i, j] = min(F_i(b_j), 1 - F_i(b_j))``.
    """
    if series.cdf_at_b is None:
        raise ValueError("series was recorded without a consensus grid")
    if b_grid is not None and tuple(b_grid) != tuple(series.b_grid):
        raise ValueError("requested grid differs from the recorded one")
    f = series.cdf_at_b
    v_curves = f.max(axis=1) - f.min(axis=1)
    mu = np.minimum(f, 1.0 - f)
    return v_curves, mu


# ---------------------------------------------------------------------------
# reachable states and the bundled invariant suite
# ---------------------------------------------------------------------------


def random_reachable_state(seed: int, num_agents: Optional[int] = None,
                           steps: Optional[int] = None) -> NetworkState:
    """A post-bisection network state reached by simulating a random setup."""
    rng = np.random.default_rng(seeding.mix64(seed, seeding.TAG_STATE))
    m = int(num_agents) if num_agents else int(rng.choice([1, 2, 3, 5]))
    n_steps = int(steps) if steps is not None else int(rng.integers(2, 12))
    if m == 1:
        matrix = InteractionMatrix(np.array([[1.0]]))
    else:
        adj = sample_er_irreducible(
            GraphSpec(m, 0.7, int(rng.integers(0, 2**63)))
        )
        matrix = weights_from_graph(adj, rng.uniform(0.35, 0.9, size=m))
    eps = rng.uniform(0.05, 0.45, size=m)
    state = initial_state(matrix, eps, float(rng.uniform(0.02, 0.98)))
    stream = seeding.KeyedStream(seed, seeding.TAG_STATE)
    for _ in range(n_steps):
        state = decentralized_step(state, rng=stream)
    return bisect_phase(state)


def _random_intervals(rng) -> tuple:
    cuts = np.sort(rng.uniform(0.0, 1.0, size=2 * int(rng.integers(1, 4))))
    return tuple((float(cuts[2 * j]), float(cuts[2 * j + 1]))
                 for j in range(cuts.size // 2))


def _matrix_form_residual(state: NetworkState, responses) -> float:
    """Independent one-step oracle: explicit per-segment evaluation of the
    combined averaging-plus-innovation matrix acting on the stacked beliefs."""
    ready = respond_phase(bisect_phase(state), responses=responses)
    nxt = fuse_phase(ready)
    grid = nxt.agents[0].belief.breakpoints
    m = state.num_agents
    entries = state.matrix.entries
    pre = np.vstack([
        bl._expand_to_grid(a.belief.breakpoints, a.belief.values, grid)
        for a in ready.agents
    ])
    got = np.vstack([a.belief.values for a in nxt.agents])
    worst = 0.0
    for k in range(grid.size - 1):
        x_mid = 0.5 * (grid[k] + grid[k + 1])
        for i in range(m):
            ag = ready.agents[i]
            eps, xh, y = ag.channel.eps, ag.last_query_point, int(ag.last_response)
            f1 = (1.0 - eps) if y == 1 else eps
            f0 = 1.0 - f1
            u = ag.belief.cdf(xh) / ag.belief.total_mass()
            z_norm = f1 * u + f0 * (1.0 - u)
            lik = f1 if x_mid <= xh else f0
            d_ii = entries[i, i] * (lik / z_norm - 1.0)
            expect = float(entries[i] @ pre[:, k]) + d_ii * pre[i, k]
            worst = max(worst, abs(expect - got[i, k]))
    return worst


def run_invariant_suite(seed: int = 20260808, verbose: bool = False) -> list:
    """The full identity battery; every report must pass.

    Covers zero-mean innovations, fair response marginals, the bisection
    identity, the weighted-mass martingale by joint enumeration, the cosh
    form of the innovation MGF, the realized dynamic-range bound along
    simulated trajectories, row-averaging contraction, log-sum-exp envelope
    slack, ergodicity-coefficient submultiplicativity, additivity over
    interval unions, and agreement of one protocol step with its combined
    matrix form.
    """
    t0 = time.time()
    rng = np.random.default_rng(seeding.mix64(seed))
    reports: list[DiagnosticReport] = []

    sizes = [1, 2, 3, 5]
    states = [random_reachable_state(seeding.mix64(seed, 10, j),
                                     num_agents=sizes[j % len(sizes)])
              for j in range(50)]

    worst_inno = worst_marg = worst_bis = worst_union = 0.0
    for st in states:
        b_set = _random_intervals(rng)
        worst_inno = max(worst_inno,
                         check_innovation_zero_mean(st, b_set).residual)
        worst_marg = max(worst_marg, check_response_marginal(st).residual)
        worst_bis = max(worst_bis, check_bisection_identity(st).residual)
        for ag in st.agents:
            direct = ag.belief.prob_union(b_set)
            summed = sum(ag.belief.cdf(b) - ag.belief.cdf(a) for a, b in b_set)
            worst_union = max(worst_union, abs(direct - summed))
    reports.append(DiagnosticReport("innovation_zero_mean", worst_inno, 1e-12))
    reports.append(DiagnosticReport("response_marginal", worst_marg, 1e-12))
    reports.append(DiagnosticReport("bisection_identity", worst_bis, 1e-9))
    reports.append(DiagnosticReport("union_additivity", worst_union, 1e-12))

    worst = 0.0
    for j, m in enumerate([1, 2, 3, 5, 8, 10]):
        st = random_reachable_state(seeding.mix64(seed, 20, j), num_agents=m,
                                    steps=4)
        b = float(rng.uniform(0.1, 0.9))
        worst = max(worst, check_martingale(st, (0.0, b)).residual)
    reports.append(DiagnosticReport("weighted_mass_martingale", worst, 1e-10))

    worst = 0.0
    for j in range(100):
        st = states[j % len(states)]
        agent = int(rng.integers(0, st.num_agents))
        b = float(rng.uniform(0.0, 1.0))
        k = float(rng.uniform(0.1, 4.0))
        worst = max(worst, check_mgf_cosh(st, agent, b, k).residual)
    reports.append(DiagnosticReport("innovation_mgf_cosh", worst, 1e-9))

    worst = 0.0
    for j in range(20):
        st = random_reachable_state(seeding.mix64(seed, 30, j),
                                    num_agents=[2, 3, 5][j % 3], steps=1)
        stream = seeding.KeyedStream(seed, 31, j)
        trace = [st]
        for _ in range(25):
            trace.append(decentralized_step(trace[-1], rng=stream))
        b_iv = (0.0, float(rng.uniform(0.1, 0.9)))
        r = int(rng.integers(1, 4))
        for t in range(0, len(trace) - r):
            worst = max(worst,
                        check_vbound(trace[t:t + r + 1], b_iv).residual)
    reports.append(DiagnosticReport("dynamic_range_bound", worst, 1e-10))

    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(2, 9))
        a = rng.dirichlet(np.ones(m), size=m)
        x = rng.uniform(0.0, 5.0, size=m)
        ax = a @ x
        lhs = float(ax.max() - ax.min())
        rhs = tau1(InteractionMatrix(a)) * float(x.max() - x.min())
        worst = max(worst, lhs - rhs)
    reports.append(DiagnosticReport("row_contraction", max(worst, 0.0), 1e-12))

    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(2, 12))
        a = rng.normal(0.0, 2.0, size=m)
        k = float(rng.uniform(0.2, 50.0))
        bound = math.log(m) / k
        for vec in (a, -a):
            hi, lo = lse_bounds(vec, k)
            worst = max(worst, -hi, -lo, hi - bound, lo - bound)
    reports.append(DiagnosticReport("lse_envelope", max(worst, 0.0), 1e-12))

    worst = 0.0
    for j in range(50):
        m = int(rng.integers(2, 7))
        adj = sample_er_irreducible(GraphSpec(m, 0.6, seeding.mix64(seed, 40, j)))
        mat = weights_from_graph(adj, rng.uniform(0.2, 0.9, size=m))
        t1 = tau1(mat)
        power = mat.entries.copy()
        for _ in range(3):
            prev = tau1(InteractionMatrix(power))
            power = power @ mat.entries
            worst = max(worst, tau1(InteractionMatrix(power)) - prev * t1)
    reports.append(DiagnosticReport("tau1_submultiplicative", max(worst, 0.0), 1e-12))

    worst = 0.0
    for j in range(10):
        st = random_reachable_state(seeding.mix64(seed, 50, j),
                                    num_agents=[2, 3][j % 2], steps=3)
        y = [int(b) for b in rng.integers(0, 2, size=st.num_agents)]
        worst = max(worst, _matrix_form_residual(st, y))
    reports.append(DiagnosticReport("matrix_form_equivalence", worst, 1e-12))

    if verbose:
        for rep in reports:
            print(rep)
        print(f"suite completed in {time.time() - t0:.1f}s")
    return reports
