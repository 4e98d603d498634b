"""Binary symmetric response channels.

Each agent answers threshold queries through a memoryless binary symmetric
channel: the correct bit comes through with probability 1 - eps.  The module
also provides the binary entropy / channel capacity helpers and the expected
entropy reduction of a query as a function of the queried mass, whose maximum
at one half is what makes median queries optimal for this channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelSpec:
    """Crossover probability of one agent's response channel.

    Strictly inside (0, 0.5): the response must carry information but may
    not be perfectly reliable.
    """

    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"crossover probability {self.eps!r} outside (0, 0.5)")

    @property
    def capacity(self) -> float:
        return capacity_bits(self.eps)


def pmf_f(z: int, y: int, eps: float) -> float:
    """P(response = y | correct answer = z) for crossover probability eps.

    Endpoints eps in {0, 0.5} are allowed for analytic checks.
    """
    if z not in (0, 1) or y not in (0, 1):
        raise ValueError("z and y must be bits")
    if not 0.0 <= eps <= 0.5:
        raise ValueError(f"eps {eps!r} outside [0, 0.5]")
    return 1.0 - eps if y == z else eps


def observation_pmf(y: int, x: float, query_point: float, eps: float) -> float:
    """Likelihood of response y when the target sits at x.

    The query region is [0, query_point]; its boundary counts as inside.
    """
    z = 1 if x <= query_point else 0
    return pmf_f(z, y, eps)


def sample_response(true_state: float, query_point: float, eps: float, rng) -> int:
    """Noisy answer to "is the target <= query_point?".

    Consumes exactly one uniform draw from ``rng`` (anything exposing
    ``random() -> float``); the answer is flipped when the draw falls
    below eps.
    """
    z = 1 if true_state <= query_point else 0
    u = rng.random()
    return z ^ (1 if u < eps else 0)


def binary_entropy_bits(p: float) -> float:
    """Entropy of a Bernoulli(p) in bits, with 0 log 0 = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p!r} outside [0, 1]")
    h = 0.0
    if 0.0 < p < 1.0:
        h = -p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p)
    return float(h)


def capacity_bits(eps: float) -> float:
    """Capacity of the binary symmetric channel, 1 - h(eps) bits per use."""
    return 1.0 - binary_entropy_bits(eps)


def phi(u: float, eps: float) -> float:
    """Expected one-step entropy reduction of a query covering mass u.

    Equals h(u(1-eps) + (1-u)eps) - h(eps); nonnegative, concave in u, and
    maximized at u = 1/2 where it equals the channel capacity.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"queried mass {u!r} outside [0, 1]")
    if not 0.0 <= eps <= 0.5:
        raise ValueError(f"eps {eps!r} outside [0, 0.5]")
    return binary_entropy_bits(u * (1.0 - eps) + (1.0 - u) * eps) - binary_entropy_bits(eps)
