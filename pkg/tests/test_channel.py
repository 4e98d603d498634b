"""Tests for the binary symmetric response channel helpers."""

import math

import numpy as np
import pytest

from bisectnet.channel import (
    ChannelSpec,
    binary_entropy_bits,
    capacity_bits,
    observation_pmf,
    phi,
    pmf_f,
    sample_response,
)
from bisectnet.seeding import KeyedStream

# frozen: 1 - (-0.05*log2(0.05) - 0.95*log2(0.95))
CAPACITY_005 = 0.7136030428840437


class TestChannelSpec:
    def test_valid(self):
        assert ChannelSpec(0.05).eps == 0.05
        assert ChannelSpec(0.05).capacity == pytest.approx(CAPACITY_005, abs=1e-12)

    @pytest.mark.parametrize("eps", [0.0, 0.5, -0.1, 0.7])
    def test_rejects_out_of_range(self, eps):
        with pytest.raises(ValueError):
            ChannelSpec(eps)


class TestPmf:
    def test_matched_bit(self):
        assert pmf_f(1, 1, 0.05) == pytest.approx(0.95, abs=1e-15)

    @pytest.mark.parametrize("z", [0, 1])
    @pytest.mark.parametrize("eps", [0.0, 0.1, 0.3, 0.5])
    def test_normalized(self, z, eps):
        assert pmf_f(z, 0, eps) + pmf_f(z, 1, eps) == pytest.approx(1.0, abs=1e-15)

    def test_noiseless_is_indicator(self):
        assert pmf_f(1, 1, 0.0) == 1.0
        assert pmf_f(1, 0, 0.0) == 0.0

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            pmf_f(2, 0, 0.1)


class TestObservationPmf:
    def test_inside_region(self):
        assert observation_pmf(1, 0.3, 0.5, 0.05) == pytest.approx(0.95, abs=1e-15)

    def test_outside_region(self):
        assert observation_pmf(1, 0.7, 0.5, 0.05) == pytest.approx(0.05, abs=1e-15)

    def test_boundary_counts_inside(self):
        assert observation_pmf(1, 0.5, 0.5, 0.05) == pytest.approx(0.95, abs=1e-15)

    @pytest.mark.parametrize("x", [0.0, 0.3, 0.5, 0.9])
    def test_normalized_over_y(self, x):
        total = observation_pmf(0, x, 0.5, 0.2) + observation_pmf(1, x, 0.5, 0.2)
        assert total == pytest.approx(1.0, abs=1e-15)


class TestSampleResponse:
    def test_noiseless(self):
        rng = np.random.default_rng(0)
        assert all(
            sample_response(0.3, 0.5, 0.0, rng) == 1 for _ in range(50)
        )
        assert all(
            sample_response(0.7, 0.5, 0.0, rng) == 0 for _ in range(50)
        )

    def test_empirical_flip_rate(self):
        rng = np.random.default_rng(7)
        n = 10**5
        hits = sum(sample_response(0.3, 0.5, 0.45, rng) for _ in range(n))
        # correct answer is 1; observed frequency 0.55 within 3 sigma
        sigma = math.sqrt(0.55 * 0.45 / n)
        assert abs(hits / n - 0.55) < 3 * sigma

    def test_reproducible_with_keyed_stream(self):
        stream_a, stream_b = KeyedStream(9), KeyedStream(9)
        seq_a = [sample_response(0.3, 0.5, 0.2, stream_a) for _ in range(32)]
        seq_b = [sample_response(0.3, 0.5, 0.2, stream_b) for _ in range(32)]
        assert seq_a == seq_b
        assert set(seq_a) <= {0, 1}

    def test_matches_observation_pmf_frequencies(self):
        n = 10**5
        for x, q in [(0.2, 0.5), (0.8, 0.5), (0.5, 0.5)]:
            rng = np.random.default_rng(42)
            p = observation_pmf(1, x, q, 0.3)
            freq = sum(sample_response(x, q, 0.3, rng) for _ in range(n)) / n
            assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n)


class TestCapacity:
    def test_uninformative(self):
        assert capacity_bits(0.5) == pytest.approx(0.0, abs=1e-15)

    def test_perfect(self):
        assert capacity_bits(0.0) == 1.0
        assert capacity_bits(1.0) == 1.0

    def test_frozen_value(self):
        assert capacity_bits(0.05) == pytest.approx(CAPACITY_005, abs=1e-12)

    def test_entropy_endpoints(self):
        assert binary_entropy_bits(0.0) == 0.0
        assert binary_entropy_bits(1.0) == 0.0
        assert binary_entropy_bits(0.5) == pytest.approx(1.0, abs=1e-15)


class TestPhi:
    def test_zero_at_endpoints(self):
        for eps in (0.05, 0.2, 0.45):
            assert phi(0.0, eps) == pytest.approx(0.0, abs=1e-12)
            assert phi(1.0, eps) == pytest.approx(0.0, abs=1e-12)

    def test_half_equals_capacity(self):
        assert phi(0.5, 0.05) == pytest.approx(CAPACITY_005, abs=1e-12)

    @pytest.mark.parametrize("eps", [0.02, 0.05, 0.2, 0.35, 0.49])
    def test_maximized_at_half(self, eps):
        grid = np.linspace(0.0, 1.0, 10**4 + 1)
        vals = np.array([phi(float(u), eps) for u in grid])
        assert grid[int(np.argmax(vals))] == pytest.approx(0.5, abs=1e-3)
        assert vals.max() == pytest.approx(capacity_bits(eps), abs=1e-9)

    @pytest.mark.parametrize("eps", [0.05, 0.25, 0.45])
    def test_nonnegative_and_concave(self, eps):
        rng = np.random.default_rng(3)
        grid = rng.uniform(0, 1, size=200)
        assert all(phi(float(u), eps) >= -1e-15 for u in grid)
        for _ in range(200):
            u1, u2, lam = rng.uniform(0, 1, size=3)
            lhs = phi(float(lam * u1 + (1 - lam) * u2), eps)
            rhs = lam * phi(float(u1), eps) + (1 - lam) * phi(float(u2), eps)
            assert lhs >= rhs - 1e-12
