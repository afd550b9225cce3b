import math

import numpy as np
import pytest

from marqoe.errors import (Infeasible, InfiniteServiceTime, InvalidParameter,
                           Unstable)
from marqoe.network import (ChannelConfig, QueueParams, ServiceMoments,
                            link_state, max_sampling_rate,
                            min_bandwidth_for_rate, queue_delay,
                            service_moments, uplink_rate)

import oracles

CANDIDATES = (30.0, 15.0, 10.0, 6.0, 5.0, 3.0, 2.0, 1.0)


class TestUplinkRate:
    def test_snr_one_gives_bandwidth(self):
        assert uplink_rate(1e6, 1.0) == pytest.approx(1e6)

    def test_zero_bandwidth(self):
        assert uplink_rate(0.0, 5.0) == 0.0

    def test_snr_three_doubles(self):
        assert uplink_rate(1e6, 3.0) == pytest.approx(2e6)

    def test_negative_rejected(self):
        with pytest.raises(InvalidParameter):
            uplink_rate(-1.0, 1.0)
        with pytest.raises(InvalidParameter):
            uplink_rate(1.0, -0.5)


class TestServiceMoments:
    def test_constant_mode_exact(self):
        channel = ChannelConfig(mean_snr=3.0)
        q = QueueParams(frame_bits=2e6)
        m = service_moments(1e6, channel, q)
        assert m.mean == pytest.approx(1.0)
        assert m.second_moment == pytest.approx(1.0)

    def test_constant_mode_zero_variance(self):
        channel = ChannelConfig(mean_snr=7.5)
        for b in (1e5, 3e6, 2e7):
            m = service_moments(b, channel, QueueParams())
            assert m.second_moment == pytest.approx(m.mean**2)

    def test_zero_bandwidth_raises(self):
        with pytest.raises(InfiniteServiceTime):
            service_moments(0.0, ChannelConfig(), QueueParams())

    def test_lognormal_matches_independent_sampler(self):
        # Oracle: same documented RNG contract, fully scalar recomputation.
        channel = ChannelConfig(mode="lognormal", mean_snr=3.0,
                                shadowing_sigma_db=3.0, seed=42)
        q = QueueParams(frame_bits=1e6)
        b = 5e6
        n = 2000
        m = service_moments(b, channel, q, n_samples=n)

        draws = np.random.default_rng(42).normal(0.0, 3.0, n)
        total, total_sq = 0.0, 0.0
        for x in draws:
            snr = 3.0 * 10.0 ** (x / 10.0)
            s = 1e6 / (b * math.log2(1.0 + snr))
            total += s
            total_sq += s * s
        assert m.mean == pytest.approx(total / n, rel=1e-12)
        assert m.second_moment == pytest.approx(total_sq / n, rel=1e-12)

    def test_lognormal_deterministic_and_exceeds_constant(self):
        channel = ChannelConfig(mode="lognormal", mean_snr=3.0,
                                shadowing_sigma_db=3.0, seed=7)
        q = QueueParams()
        a = service_moments(4e6, channel, q)
        b = service_moments(4e6, channel, q)
        assert a == b
        constant = service_moments(4e6, ChannelConfig(mean_snr=3.0), q)
        assert a.mean > constant.mean  # Jensen on 1/r


class TestQueueDelay:
    def test_zero_rate_is_service_mean(self):
        m = ServiceMoments(0.25, 0.0625)
        assert queue_delay(0.0, m) == pytest.approx(0.25, abs=1e-12)

    def test_deterministic_half_utilization(self):
        s = 0.04
        m = ServiceMoments(s, s * s)
        rate = 0.5 / s
        assert queue_delay(rate, m) == pytest.approx(1.5 * s, abs=1e-12)

    def test_arithmetic_example(self):
        # rho=0.9 at E[S]=0.1, E[S^2]=0.02: 0.1 + 9*0.02/(2*0.1) = 1.0
        assert queue_delay(9.0, ServiceMoments(0.1, 0.02)) == pytest.approx(1.0)

    def test_unstable_raises(self):
        with pytest.raises(Unstable):
            queue_delay(11.0, ServiceMoments(0.1, 0.01))

    def test_monotone_in_rate_and_bandwidth(self):
        channel = ChannelConfig(mean_snr=3.0)
        q = QueueParams(frame_bits=1e6)
        delays = []
        for rate in (1.0, 2.0, 5.0, 9.0):
            delays.append(queue_delay(rate, service_moments(1e7, channel, q)))
        assert delays == sorted(delays)
        by_bandwidth = [queue_delay(5.0, service_moments(b, channel, q))
                        for b in (6e6, 1e7, 2e7, 5e7)]
        assert by_bandwidth == sorted(by_bandwidth, reverse=True)


class TestMaxSamplingRate:
    def test_huge_bandwidth_gives_max_candidate(self):
        got = max_sampling_rate(1e12, ChannelConfig(), QueueParams(), CANDIDATES)
        assert got == max(CANDIDATES)

    def test_zero_bandwidth_gives_none(self):
        assert max_sampling_rate(0.0, ChannelConfig(), QueueParams(),
                                 CANDIDATES) is None

    def test_matches_exhaustive_oracle(self):
        channel = ChannelConfig(mean_snr=3.0)
        q = QueueParams(frame_bits=1e6, max_delay=0.1)
        for b in np.linspace(1e5, 3e7, 40):
            got = max_sampling_rate(b, channel, q, CANDIDATES)
            feasible = []
            for rate in CANDIDATES:
                m = service_moments(b, channel, q)
                if rate * m.mean < 1.0 and queue_delay(rate, m) <= q.max_delay:
                    feasible.append(rate)
            want = max(feasible) if feasible else None
            assert got == want

    def test_monotone_in_bandwidth(self):
        channel = ChannelConfig(mean_snr=2.0)
        q = QueueParams(frame_bits=1e6, max_delay=0.1)
        rates = []
        for b in np.linspace(1e5, 5e7, 100):
            r = max_sampling_rate(b, channel, q, CANDIDATES)
            rates.append(0.0 if r is None else r)
        assert all(a <= b for a, b in zip(rates, rates[1:]))


class TestMinBandwidthForRate:
    def test_bisection_contract(self):
        channel = ChannelConfig(mean_snr=3.0)
        q = QueueParams(frame_bits=1e6, max_delay=0.1)
        b = min_bandwidth_for_rate(10.0, channel, q)
        m = service_moments(b, channel, q)
        assert queue_delay(10.0, m) <= q.max_delay
        m_low = service_moments(0.99 * b, channel, q)
        violated = (10.0 * m_low.mean >= 1.0
                    or queue_delay(10.0, m_low) > q.max_delay)
        assert violated

    def test_monotone_in_rate(self):
        channel = ChannelConfig(mean_snr=3.0)
        q = QueueParams(frame_bits=1e6, max_delay=0.1)
        b1 = min_bandwidth_for_rate(5.0, channel, q)
        b2 = min_bandwidth_for_rate(10.0, channel, q)
        assert b2 > b1

    def test_matches_closed_form(self):
        q = QueueParams(frame_bits=1e6, max_delay=0.1)
        for snr in (1.0, 3.0, 9.0):
            channel = ChannelConfig(mean_snr=snr)
            for rate in CANDIDATES:
                got = min_bandwidth_for_rate(rate, channel, q)
                want = oracles.min_bandwidth_closed_form(rate, snr, 1e6, 0.1)
                assert abs(got - want) <= 1e3

    def test_infeasible_above_ceiling(self):
        with pytest.raises(Infeasible):
            min_bandwidth_for_rate(10.0, ChannelConfig(mean_snr=3.0),
                                   QueueParams(frame_bits=1e6, max_delay=0.1),
                                   ceiling_hz=1e4)


class TestDg1Simulation:
    @pytest.mark.parametrize("rho", [0.3, 0.5, 0.7])
    def test_formula_upper_bounds_simulation(self, rho):
        channel = ChannelConfig(mode="lognormal", mean_snr=3.0,
                                shadowing_sigma_db=3.0, seed=100)
        q = QueueParams(frame_bits=1e6)
        b = 5e6
        moments = service_moments(b, channel, q, n_samples=200_000)
        rate = rho / moments.mean
        formula = queue_delay(rate, moments)

        # Independent service draws for the event-driven run.
        draws = np.random.default_rng(200 + int(rho * 10)).normal(0.0, 3.0, 120_000)
        services = [1e6 / (b * math.log2(1.0 + 3.0 * 10.0 ** (x / 10.0)))
                    for x in draws]
        simulated = oracles.lindley_sojourn_mean(1.0 / rate, services)
        assert simulated >= moments.mean * 0.99
        assert simulated <= 1.05 * formula


class TestLinkState:
    def test_infeasible_link(self):
        state = link_state("u", 0.0, ChannelConfig(), QueueParams(), CANDIDATES)
        assert state.sampling_rate == 0.0
        assert math.isinf(state.delay)

    def test_feasible_link_within_budget(self):
        q = QueueParams(frame_bits=1e6, max_delay=0.1)
        state = link_state("u", 2e7, ChannelConfig(mean_snr=3.0), q, CANDIDATES)
        assert state.sampling_rate > 0
        assert state.delay <= q.max_delay

    def test_forced_rate_can_violate(self):
        q = QueueParams(frame_bits=1e6, max_delay=0.1)
        channel = ChannelConfig(mean_snr=3.0)
        b = min_bandwidth_for_rate(10.0, channel, q) * 0.9
        state = link_state("u", b, channel, q, CANDIDATES, rate=10.0)
        assert state.delay > q.max_delay or math.isinf(state.delay)
