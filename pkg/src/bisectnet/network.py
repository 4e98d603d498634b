"""Interaction matrices and random information-sharing graphs.

The interaction matrix A is row-stochastic: a[i, j] is the weight agent i
places on agent j's belief, and a[i, i] is agent i's self-reliance.  Agent i
reads agent j whenever a[i, j] > 0.  Experiments draw the sparsity pattern
from Erdos-Renyi graphs conditioned on connectivity and fill the weights from
per-agent self-reliances with the leftover mass split equally over neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, SamplingError, SearchExhaustedError

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Square nonnegative matrix with unit row sums (checked via validate)."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError("entries must be a square M x M array with M >= 1")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def self_reliances(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def to_json(self) -> list:
        return self.entries.tolist()


@dataclass(frozen=True)
class GraphSpec:
    """Erdos-Renyi ensemble parameters: G(num_nodes, edge_prob), seeded."""

    num_nodes: int
    edge_prob: float
    seed: int

    def __post_init__(self):
        if self.num_nodes < 2:
            raise ValueError("need at least 2 nodes")
        if not 0.0 < self.edge_prob < 1.0:
            raise ValueError(f"edge probability {self.edge_prob!r} outside (0, 1)")


def validate(A: InteractionMatrix) -> bool:
    """True iff entries are nonnegative and every row sums to 1."""
    a = A.entries
    if np.any(a < 0.0) or not np.all(np.isfinite(a)):
        return False
    return bool(np.all(np.abs(a.sum(axis=1) - 1.0) <= ROW_SUM_TOL))


def _reachable_from(adj: np.ndarray, start: int) -> np.ndarray:
    """Boolean reachability set of ``start`` in a directed boolean adjacency."""
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    frontier = seen.copy()
    while frontier.any():
        nxt = adj[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = nxt
    return seen


def is_strongly_connected(A: InteractionMatrix) -> bool:
    """True iff the read graph (edge i -> j when a[i, j] > 0) is one SCC."""
    adj = A.entries > 0.0
    if A.size == 1:
        return True
    fwd = _reachable_from(adj, 0)
    bwd = _reachable_from(adj.T, 0)
    return bool(fwd.all() and bwd.all())


def is_closed_component_union(A: InteractionMatrix) -> bool:
    """True iff every edge of the read graph stays inside one strongly
    connected component (a disjoint union of closed subnetworks)."""
    adj = A.entries > 0.0
    n = A.size
    reach = adj | np.eye(n, dtype=bool)
    for _ in range(int(np.ceil(np.log2(max(n, 2)))) + 1):
        reach = reach | (reach @ reach)
    mutual = reach & reach.T
    rows, cols = np.nonzero(adj)
    return bool(np.all(mutual[rows, cols]))


def tau1(A: InteractionMatrix) -> float:
    """Ergodicity coefficient: half the largest L1 distance between rows.

    Always in [0, 1]; zero iff all rows coincide, one for the identity.
    """
    a = A.entries
    if A.size == 1:
        return 0.0
    diff = np.abs(a[:, None, :] - a[None, :, :]).sum(axis=2)
    return float(0.5 * diff.max())


def contraction_power(A: InteractionMatrix, r_max: int) -> tuple[int, float]:
    """Smallest power r <= r_max with tau1(A^r) < 1, and that coefficient."""
    if r_max < 1:
        raise ValueError("r_max must be at least 1")
    power = A.entries.copy()
    for r in range(1, r_max + 1):
        t = tau1(InteractionMatrix(power))
        if t < 1.0:
            return r, t
        power = power @ A.entries
    raise SearchExhaustedError(
        f"no power up to {r_max} contracts; matrix violates the "
        "strong-connectivity/positive-diagonal assumption"
    )


def left_perron(A: InteractionMatrix, tol: float = 1e-13) -> np.ndarray:
    """Positive left fixed vector of A, normalized to sum 1.

    Power iteration on the transpose; converged when the fixed-point
    residual ||v A - v||_inf drops below ``tol``.
    """
    a = A.entries
    v = np.full(A.size, 1.0 / A.size)
    for _ in range(10**6):
        w = v @ a
        w /= w.sum()
        if np.max(np.abs(w @ a - w)) <= tol:
            if np.any(w <= 0.0):
                raise ConvergenceError("left fixed vector has nonpositive entries")
            return w
        v = w
    raise ConvergenceError(f"power iteration did not reach residual {tol}")


def sample_er_irreducible(spec: GraphSpec) -> np.ndarray:
    """Connected Erdos-Renyi sample: symmetric boolean adjacency, no loops.

    Rejection-samples G(M, p) until connected; deterministic given the seed.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.num_nodes
    for _ in range(10**5):
        upper = np.triu(rng.random((n, n)) < spec.edge_prob, k=1)
        adj = upper | upper.T
        if _reachable_from(adj, 0).all():
            return adj
    raise SamplingError(
        f"no connected graph in 1e5 draws from G({n}, {spec.edge_prob})"
    )


def weights_from_graph(adjacency: np.ndarray, self_reliance) -> InteractionMatrix:
    """Interaction weights from an undirected adjacency.

    Row i gets ``self_reliance[i]`` on the diagonal and splits the remaining
    mass equally over its neighbors.  The result is row-stochastic and, for a
    connected graph, strongly connected with a positive diagonal.
    """
    adj = np.asarray(adjacency, dtype=bool)
    n = adj.shape[0]
    s = np.broadcast_to(np.asarray(self_reliance, dtype=np.float64), (n,))
    if np.any((s <= 0.0) | (s >= 1.0)):
        raise ValueError("self-reliances must lie strictly inside (0, 1)")
    deg = adj.sum(axis=1)
    if np.any(deg == 0):
        raise ValueError(f"isolated nodes {np.flatnonzero(deg == 0).tolist()}")
    a = adj / deg[:, None] * (1.0 - s)[:, None]
    np.fill_diagonal(a, s)
    return InteractionMatrix(a)


def complete_adjacency(n: int) -> np.ndarray:
    """All-pairs adjacency, used as the default sharing topology."""
    return ~np.eye(n, dtype=bool)
