"""Uplink rate, D/G/1 delay bound, and the bandwidth <-> sampling-rate coupling.

The uplink rate is Shannon capacity in base 2: ``b * log2(1 + snr)``.
Mean sojourn time of a deterministic-arrival single-server queue is
approximated by ``E[S] + rate * E[S^2] / (2 * (1 - rate * E[S]))``, an
upper-bound style formula that the test suite validates against a
discrete-event simulation.

The stochastic channel is lognormal shadowing: the SNR of frame f is
``mean_snr * 10**(X/10)`` with ``X ~ Normal(0, shadowing_sigma_db)`` drawn
from ``numpy.random.default_rng(seed)`` (this draw sequence is part of the
reproducibility contract).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, InfiniteServiceTime, InvalidParameter, Unstable

# Sampling rates are restricted to divisors of the trace fps so resampled
# histories stay frame-aligned.
DEFAULT_RATE_CANDIDATES = (30.0, 15.0, 10.0, 6.0, 5.0, 3.0, 2.0, 1.0)
DEFAULT_MC_SAMPLES = 4096
BISECTION_TOL_HZ = 1e3


@dataclass(frozen=True)
class ChannelConfig:
    """Per-user SNR process: constant, or lognormal shadowing around a mean."""

    mode: str = "constant"
    mean_snr: float = 3.0
    shadowing_sigma_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("constant", "lognormal"):
            raise InvalidParameter(f"unknown channel mode {self.mode!r}")
        if self.mean_snr <= 0:
            raise InvalidParameter(f"mean_snr must be positive: {self.mean_snr}")
        if self.shadowing_sigma_db < 0:
            raise InvalidParameter("shadowing_sigma_db must be >= 0")

    def snr_samples(self, n: int) -> np.ndarray:
        if self.mode == "constant":
            return np.full(n, self.mean_snr)
        draws = np.random.default_rng(self.seed).normal(
            0.0, self.shadowing_sigma_db, n)
        return self.mean_snr * 10.0 ** (draws / 10.0)


@dataclass(frozen=True)
class QueueParams:
    """Upload volume per frame (bits) and the delay budget (seconds)."""

    frame_bits: float = 1.0e6
    max_delay: float = 0.1

    def __post_init__(self):
        if self.frame_bits <= 0 or self.max_delay <= 0:
            raise InvalidParameter("frame_bits and max_delay must be positive")


@dataclass(frozen=True)
class ServiceMoments:
    mean: float
    second_moment: float

    def __post_init__(self):
        if self.second_moment < self.mean**2 * (1 - 1e-12):
            raise InvalidParameter("second_moment below mean^2 violates Jensen")


@dataclass(frozen=True)
class LinkState:
    """Operating point of one uplink: bandwidth, chosen rate, resulting delay."""

    user_id: str
    bandwidth: float
    sampling_rate: float  # 0.0 when no candidate rate is feasible
    delay: float          # math.inf when infeasible


def uplink_rate(bandwidth: float, snr: float) -> float:
    """Shannon uplink rate in bits/s, log base 2."""
    if bandwidth < 0 or snr < 0:
        raise InvalidParameter(f"negative input: b={bandwidth}, snr={snr}")
    return bandwidth * math.log2(1.0 + snr)


def service_moments(bandwidth: float, channel: ChannelConfig, q: QueueParams,
                    n_samples: int = DEFAULT_MC_SAMPLES) -> ServiceMoments:
    """First two moments of the per-frame transmission time at a bandwidth.

    Constant mode is exact; lognormal mode is a seeded Monte-Carlo average
    over ``n_samples`` SNR draws (deterministic for a fixed channel seed).
    """
    if bandwidth < 0:
        raise InvalidParameter(f"negative bandwidth {bandwidth}")
    if bandwidth == 0:
        raise InfiniteServiceTime("zero bandwidth")
    if channel.mode == "constant":
        mean = q.frame_bits / uplink_rate(bandwidth, channel.mean_snr)
        return ServiceMoments(mean, mean * mean)
    snr = channel.snr_samples(n_samples)
    service = q.frame_bits / (bandwidth * np.log2(1.0 + snr))
    return ServiceMoments(float(np.mean(service)), float(np.mean(service**2)))


def queue_delay(rate: float, moments: ServiceMoments) -> float:
    """Mean sojourn time for deterministic arrivals at ``rate`` uploads/s."""
    if rate < 0:
        raise InvalidParameter(f"negative rate {rate}")
    utilization = rate * moments.mean
    if utilization >= 1.0:
        raise Unstable(f"rate*E[S] = {utilization} >= 1")
    return moments.mean + rate * moments.second_moment / (2.0 * (1.0 - utilization))


def max_sampling_rate(bandwidth: float, channel: ChannelConfig, q: QueueParams,
                      candidates=DEFAULT_RATE_CANDIDATES,
                      n_samples: int = DEFAULT_MC_SAMPLES) -> float | None:
    """Largest candidate rate whose delay stays within budget, or None."""
    if not candidates:
        raise InvalidParameter("empty candidate set")
    if any(c <= 0 for c in candidates):
        raise InvalidParameter("candidates must be positive")
    if bandwidth <= 0:
        return None
    moments = service_moments(bandwidth, channel, q, n_samples)
    for rate in sorted(candidates, reverse=True):
        if rate * moments.mean >= 1.0:
            continue
        if queue_delay(rate, moments) <= q.max_delay:
            return rate
    return None


def min_bandwidth_for_rate(rate: float, channel: ChannelConfig, q: QueueParams,
                           ceiling_hz: float = 1.0e10,
                           tol_hz: float = BISECTION_TOL_HZ,
                           n_samples: int = DEFAULT_MC_SAMPLES) -> float:
    """Smallest bandwidth (to ``tol_hz``) that supports ``rate`` within budget.

    The delay is monotone nonincreasing in bandwidth (service times scale
    as 1/b with the same SNR draws), so bisection is valid.
    """
    if rate <= 0:
        raise InvalidParameter(f"rate must be positive: {rate}")

    def feasible(b: float) -> bool:
        if b <= 0:
            return False
        m = service_moments(b, channel, q, n_samples)
        if rate * m.mean >= 1.0:
            return False
        return queue_delay(rate, m) <= q.max_delay

    hi = ceiling_hz
    if not feasible(hi):
        raise Infeasible(f"rate {rate} infeasible below ceiling {ceiling_hz} Hz")
    lo = 0.0
    while hi - lo > tol_hz:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def link_state(user_id: str, bandwidth: float, channel: ChannelConfig,
               q: QueueParams, candidates=DEFAULT_RATE_CANDIDATES,
               rate: float | None = None,
               n_samples: int = DEFAULT_MC_SAMPLES) -> LinkState:
    """Resolve the operating point of a link.

    With ``rate=None`` the largest feasible candidate is chosen; passing an
    explicit rate computes the delay at that rate (possibly over budget),
    which feasibility checks can then flag.
    """
    if rate is None:
        rate = max_sampling_rate(bandwidth, channel, q, candidates, n_samples)
        if rate is None:
            return LinkState(user_id, bandwidth, 0.0, math.inf)
    if bandwidth <= 0:
        return LinkState(user_id, bandwidth, 0.0, math.inf)
    moments = service_moments(bandwidth, channel, q, n_samples)
    try:
        delay = queue_delay(rate, moments)
    except Unstable:
        delay = math.inf
    return LinkState(user_id, bandwidth, rate, delay)
