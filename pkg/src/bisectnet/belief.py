"""Piecewise-constant belief densities on the unit interval.

Agents carry their uncertainty about the target as a probability density on
[0, 1] that is constant on finitely many half-open segments.  A binary
query/response update multiplies such a density by a two-level step function,
so the class is closed under every operation the protocol performs and the
simulation runs bias-free on closed-form densities.  A capped grid resampling
exists only as an overflow valve inside :func:`simplify`.

Densities are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import PreconditionError

NORMALIZATION_TOL = 1e-9
MEDIAN_TOL = 1e-9
MIN_SEGMENT_WIDTH = 1e-15
ITERATION_CAP = 1000
DEFAULT_MAX_SEGMENTS = 20 * ITERATION_CAP


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PiecewiseDensity:
    """Probability density on [0, 1], constant on half-open segments.

    ``values[k]`` is the density height (probability per unit length) on
    ``[breakpoints[k], breakpoints[k+1])``; the last segment is closed at 1.

    Invariants enforced at construction: breakpoints strictly increasing from
    0 to 1, heights nonnegative, total mass within ``NORMALIZATION_TOL`` of 1.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = _as_readonly(self.breakpoints)
        v = _as_readonly(self.values)
        if bp.ndim != 1 or v.ndim != 1 or bp.size != v.size + 1 or v.size < 1:
            raise ValueError("need K+1 breakpoints for K >= 1 segments")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if not np.all(np.diff(bp) > 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(v < 0.0) or not np.all(np.isfinite(v)):
            raise ValueError("density heights must be finite and nonnegative")
        mass = float(np.diff(bp) @ v)
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"total mass {mass!r} is not 1 within {NORMALIZATION_TOL}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", v)

    @property
    def num_segments(self) -> int:
        return self.values.size

    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def masses(self) -> np.ndarray:
        return self.widths() * self.values

    def total_mass(self) -> float:
        return float(np.sum(self.masses()))

    def cdf(self, x: float) -> float:
        """Accumulated mass on [0, x]."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"cdf argument {x!r} outside [0, 1]")
        bp = self.breakpoints
        k = int(np.searchsorted(bp, x, side="right")) - 1
        if k >= self.values.size:  # x == 1
            return float(np.sum(self.masses()))
        cum = np.concatenate(([0.0], np.cumsum(self.masses())))
        return float(cum[k] + self.values[k] * (x - bp[k]))

    def quantile(self, q: float) -> float:
        """Generalized inverse CDF with ties resolved toward positive mass.

        Inside a positive segment this is the exact CDF inverse; when the
        target mass is reached on a zero-height run, the left endpoint of the
        next positive-mass segment is returned.
        """
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile argument {q!r} outside [0, 1]")
        x, _, _ = _quantile_core(self.breakpoints, self.values, q)
        return x

    def prob_interval(self, a: float, b: float) -> float:
        """Mass on [a, b)."""
        if a > b:
            raise ValueError(f"interval [{a}, {b}) is reversed")
        return self.cdf(b) - self.cdf(a)

    def prob_union(self, intervals: Iterable[tuple[float, float]]) -> float:
        """Mass on a finite union of pairwise-disjoint intervals [a_k, b_k)."""
        ivs = sorted((float(a), float(b)) for a, b in intervals)
        for (a0, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise ValueError(f"intervals [{a0},{b0}) and starting at {a1} overlap")
        return float(sum(self.prob_interval(a, b) for a, b in ivs))

    def mean(self) -> float:
        """First moment, computed segment-exactly from masses and midpoints."""
        bp = self.breakpoints
        return float(np.sum(self.masses() * 0.5 * (bp[:-1] + bp[1:])))

    def entropy_bits(self) -> float:
        """Differential entropy in bits; zero for the uniform density."""
        m = self.masses()
        pos = self.values > 0.0
        return float(-np.sum(m[pos] * np.log2(self.values[pos])))

    def density_at(self, x: float) -> float:
        """Height of the segment containing x (right-continuous at breakpoints)."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"point {x!r} outside [0, 1]")
        k = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        k = min(k, self.values.size - 1)
        return float(self.values[k])

    def to_json(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "PiecewiseDensity":
        return cls(np.asarray(obj["breakpoints"]), np.asarray(obj["values"]))


def uniform_prior() -> PiecewiseDensity:
    """Flat density on [0, 1]."""
    return PiecewiseDensity(np.array([0.0, 1.0]), np.array([1.0]))


def _quantile_from_cum(
    bp: np.ndarray, values: np.ndarray, masses: np.ndarray, cum: np.ndarray, q: float
):
    """Quantile kernel on precomputed segment masses and their running sum.

    Returns ``(x, segment, mass_before_x_within_segment)``.  The running sum
    excludes a leading zero.  When the target mass is reached on a zero-height
    run, the search lands on the next positive-mass segment and x is its left
    endpoint (with in-segment mass 0).
    """
    total = cum[-1]
    if total <= 0.0:
        raise PreconditionError("density carries no mass; quantile undefined")
    target = q * total
    k = int(np.searchsorted(cum, target, side="right"))
    if k >= values.size:
        k = int(np.flatnonzero(masses > 0.0)[-1])
    before = float(cum[k - 1]) if k > 0 else 0.0
    if before >= target:
        return float(bp[k]), k, 0.0
    inside = target - before
    x = bp[k] + inside / values[k]
    x = float(min(max(x, bp[k]), bp[k + 1]))
    return x, k, float(inside)


def _quantile_core(bp: np.ndarray, values: np.ndarray, q: float):
    masses = values * np.diff(bp)
    return _quantile_from_cum(bp, values, masses, np.cumsum(masses), q)


def bisect(d: PiecewiseDensity) -> tuple[float, PiecewiseDensity]:
    """Median split: both halves of the returned density carry equal mass.

    Returns ``(x_hat, refined)`` where ``refined`` equals ``d`` as a measure
    except that ``x_hat`` is a breakpoint and the stored masses to its left
    sum to exactly half the total.  Splitting assigns the half-open pieces the
    heights that realize the exact half-mass split, absorbing the one-ulp
    positioning error of the median into the heights rather than the masses.

    When the median cannot be realized as an interior point of its segment
    (mass packed into a one-ulp segment), the nearest breakpoint is returned
    and the density is left untouched; callers must then treat the split as
    inexact.
    """
    bp, v = d.breakpoints, d.values
    x, k, inside = _quantile_core(bp, v, 0.5)
    if x <= bp[k] or x >= bp[k + 1]:
        return x, d
    mass_seg = v[k] * (bp[k + 1] - bp[k])
    left_w = x - bp[k]
    right_w = bp[k + 1] - x
    new_bp = np.insert(bp, k + 1, x)
    new_v = np.insert(v, k + 1, (mass_seg - inside) / right_w)
    new_v[k] = inside / left_w
    return x, PiecewiseDensity(new_bp, new_v)


def _insert_breakpoint(bp: np.ndarray, v: np.ndarray, x: float):
    """Plain refinement: add x as a breakpoint, duplicating the height."""
    k = int(np.searchsorted(bp, x, side="right")) - 1
    if k < 0 or k >= v.size or x == bp[k]:
        return bp, v
    return np.insert(bp, k + 1, x), np.insert(v, k + 1, v[k])


def bayes_bsc_update(
    d: PiecewiseDensity, query_point: float, y: int, eps: float
) -> PiecewiseDensity:
    """Posterior after a noisy binary answer to "is the target <= query_point?".

    The query point must be a median of ``d`` (mass of [0, query_point] equal
    to 1/2 within ``MEDIAN_TOL``), which makes the Bayes normalizer exactly
    one half: the update multiplies the density by twice the response
    likelihood, 2*(1-eps) on the side the answer points to and 2*eps on the
    other.
    """
    if not 0.0 < eps < 0.5:
        raise ValueError(f"crossover probability {eps!r} outside (0, 0.5)")
    if y not in (0, 1):
        raise ValueError(f"response {y!r} is not a bit")
    if not 0.0 <= query_point <= 1.0:
        raise ValueError(f"query point {query_point!r} outside [0, 1]")
    half = 0.5 * d.total_mass()
    if abs(d.cdf(query_point) - half) > MEDIAN_TOL:
        raise PreconditionError(
            f"query point {query_point!r} is not a median "
            f"(cdf={d.cdf(query_point)!r})"
        )
    bp, v = _insert_breakpoint(d.breakpoints, d.values, query_point)
    f_left = (1.0 - eps) if y == 1 else eps
    f_right = eps if y == 1 else (1.0 - eps)
    inside = bp[1:] <= query_point
    new_v = v * np.where(inside, 2.0 * f_left, 2.0 * f_right)
    return PiecewiseDensity(bp, new_v)


def _expand_to_grid(bp: np.ndarray, v: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Heights of (bp, v) on the segments of a refining grid."""
    idx = np.searchsorted(bp, grid[:-1], side="right") - 1
    idx = np.clip(idx, 0, v.size - 1)
    return v[idx]


def mix(
    densities: Sequence[PiecewiseDensity], weights: Sequence[float]
) -> PiecewiseDensity:
    """Pointwise convex combination on the union of the input breakpoints."""
    w = np.asarray(weights, dtype=np.float64)
    if len(densities) != w.size or w.size == 0:
        raise ValueError("need one weight per density")
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    grid = np.unique(np.concatenate([d.breakpoints for d in densities]))
    out = np.zeros(grid.size - 1)
    for d, wi in zip(densities, w):
        if wi != 0.0:
            out += wi * _expand_to_grid(d.breakpoints, d.values, grid)
    return PiecewiseDensity(grid, out)


def _tv_distance(a: PiecewiseDensity, b: PiecewiseDensity) -> float:
    grid = np.unique(np.concatenate([a.breakpoints, b.breakpoints]))
    va = _expand_to_grid(a.breakpoints, a.values, grid)
    vb = _expand_to_grid(b.breakpoints, b.values, grid)
    return float(0.5 * np.sum(np.abs(va - vb) * np.diff(grid)))


def _merge_columns(bp: np.ndarray, v: np.ndarray, drop: np.ndarray):
    """Remove interior breakpoints flagged in ``drop`` (bool over bp[1:-1]),
    mass-preservingly re-averaging the merged runs."""
    keep = np.concatenate(([True], ~drop, [True]))
    new_bp = bp[keep]
    masses = v * np.diff(bp)
    seg_of = np.cumsum(keep[:-1]) - 1
    new_m = np.zeros(new_bp.size - 1)
    np.add.at(new_m, seg_of, masses)
    return new_bp, new_m / np.diff(new_bp)


def simplify(
    d: PiecewiseDensity,
    value_tol: float = 0.0,
    max_segments: int = DEFAULT_MAX_SEGMENTS,
) -> tuple[PiecewiseDensity, float]:
    """Reduce segment count; returns the density and its exact TV distance
    to the input.

    Three passes, each mass-preserving:
      1. adjacent segments whose heights agree within ``value_tol``
         (relative) are merged to their average height;
      2. segments narrower than ``MIN_SEGMENT_WIDTH`` that carry negligible
         mass are folded into a neighbor (heavy ulp-wide spikes are kept:
         spreading them would displace real mass);
      3. if the count still exceeds ``max_segments``, the density is
         resampled onto that many equal-width bins.
    """
    if value_tol < 0.0:
        raise ValueError("value_tol must be nonnegative")
    if max_segments < 2:
        raise ValueError("max_segments must be at least 2")
    bp, v = d.breakpoints.copy(), d.values.copy()

    if v.size > 1:
        left, right = v[:-1], v[1:]
        scale = np.maximum(np.maximum(left, right), 1e-300)
        drop = np.abs(left - right) <= value_tol * scale
        widths = np.diff(bp)
        tiny = (widths < MIN_SEGMENT_WIDTH) & (v * widths <= 1e-12)
        # folding a tiny segment into its successor removes the breakpoint
        # between them; the last segment folds backwards instead
        drop |= tiny[:-1]
        drop |= tiny[1:] & (np.arange(v.size - 1) == v.size - 2)
        if np.any(drop):
            bp, v = _merge_columns(bp, v, drop)

    if v.size > max_segments:
        grid = np.linspace(0.0, 1.0, max_segments + 1)
        grid_cdf = np.interp(
            grid,
            bp,
            np.concatenate(([0.0], np.cumsum(v * np.diff(bp)))),
        )
        v = np.diff(grid_cdf) / np.diff(grid)
        bp = grid

    out = PiecewiseDensity(bp, v)
    return out, _tv_distance(d, out)
