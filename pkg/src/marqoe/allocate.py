"""Donor/receiver bandwidth reallocation and the provisioning objective.

``reallocate`` is a single pass: users whose predicted QoE clears the high
threshold release bandwidth down to the cheapest sampling-rate tier that
still keeps them near the target; users below the target pool their QoE
deficits and split the released surplus in proportion to deficit.  Users
between the thresholds are untouched.  There is no iterative re-balancing,
and surplus stays released when nobody needs it.

Predictions and tier tables are supplied as callables so the algorithm can
run against the full simulation pipeline or against stubs in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .errors import InvalidInput, InvalidParameter
from .network import LinkState, QueueParams

PredictFn = Callable[[str, float], float]      # (user, bandwidth) -> QoE
TiersFn = Callable[[str], Sequence[float]]     # user -> ascending tier bandwidths


@dataclass(frozen=True)
class AllocationParams:
    target_qoe: float = 0.7      # h_tar: below this a user becomes a receiver
    high_qoe: float = 0.85       # h_hig: above this a user becomes a donor
    total_bandwidth: float = 1.0e8
    tradeoff_weight: float = 0.0  # utility lost per Hz reserved
    utility: str = "identity"     # or "log1p"
    search_tolerance: float = 0.02

    def __post_init__(self):
        if not (0.0 <= self.target_qoe < self.high_qoe <= 1.0):
            raise InvalidParameter(
                f"need 0 <= h_tar < h_hig <= 1, got {self.target_qoe}, {self.high_qoe}")
        if self.total_bandwidth <= 0:
            raise InvalidParameter("total_bandwidth must be positive")
        if self.tradeoff_weight < 0:
            raise InvalidParameter("tradeoff_weight must be >= 0")
        if self.utility not in ("identity", "log1p"):
            raise InvalidParameter(f"unknown utility {self.utility!r}")

    def apply_utility(self, h: float) -> float:
        return math.log1p(h) if self.utility == "log1p" else h


@dataclass(frozen=True)
class Violation:
    user: str | None  # None for system-wide constraints
    constraint: str   # "budget" | "delay" | "infeasible-link"
    detail: str


@dataclass(frozen=True)
class AllocationResult:
    new_bandwidths: dict[str, float]
    donors: dict[str, float]      # user -> released Hz
    receivers: dict[str, float]   # user -> granted Hz
    surplus: float                # total released (B_sur)
    total_deficit: float          # sum of receiver QoE deficits (D_all)
    predicted_before: dict[str, float]
    predicted_after: dict[str, float]

    def role_of(self, user: str) -> str:
        if user in self.donors:
            return "donor"
        if user in self.receivers:
            return "receiver"
        return "untouched"


def objective(bandwidths: Sequence[float], qoe_values: Sequence[float],
              params: AllocationParams) -> float:
    """Total utility of the QoE vector minus the weighted spectrum spend."""
    if len(bandwidths) != len(qoe_values):
        raise InvalidInput(
            f"length mismatch: {len(bandwidths)} bandwidths, {len(qoe_values)} QoE values")
    utility = sum(params.apply_utility(h) for h in qoe_values)
    return utility - params.tradeoff_weight * sum(bandwidths)


def check_feasibility(bandwidths: Mapping[str, float],
                      link_states: Mapping[str, LinkState],
                      params: AllocationParams,
                      queue: QueueParams) -> list[Violation]:
    """Budget and per-link delay checks; empty list means feasible."""
    violations = []
    total = sum(bandwidths.values())
    if total > params.total_bandwidth:
        violations.append(Violation(
            None, "budget",
            f"sum of bandwidths {total:.0f} Hz exceeds {params.total_bandwidth:.0f} Hz"))
    for user in sorted(bandwidths):
        state = link_states.get(user)
        if state is None:
            continue
        if state.sampling_rate <= 0:
            violations.append(Violation(
                user, "infeasible-link",
                f"no feasible sampling rate at {bandwidths[user]:.0f} Hz"))
        elif state.delay > queue.max_delay:
            violations.append(Violation(
                user, "delay",
                f"delay {state.delay:.4f} s exceeds budget {queue.max_delay:.4f} s"))
    return violations


def donor_reduced_bandwidth(user: str, current_b: float,
                            params: AllocationParams,
                            predict_fn: PredictFn,
                            tier_bandwidths: Sequence[float]) -> float:
    """Cheapest tier bandwidth below current_b that keeps QoE near target.

    Tiers are scanned in ascending bandwidth order and the first whose
    predicted QoE reaches ``h_tar - search_tolerance`` wins (ties resolved
    toward less bandwidth).  If no lower tier qualifies the current
    bandwidth is returned unchanged.
    """
    floor = params.target_qoe - params.search_tolerance
    for tier_b in sorted(tier_bandwidths):
        if tier_b >= current_b:
            break
        if predict_fn(user, tier_b) >= floor:
            return tier_b
    return current_b


def reallocate(bandwidths: Mapping[str, float], params: AllocationParams,
               predict_fn: PredictFn, tiers_fn: TiersFn) -> AllocationResult:
    """One donor/receiver pass over all users at their current bandwidths."""
    users = sorted(bandwidths)
    predicted_before: dict[str, float] = {}
    new_b: dict[str, float] = {}
    donors: dict[str, float] = {}
    receivers: dict[str, float] = {}
    deficits: dict[str, float] = {}
    surplus = 0.0
    total_deficit = 0.0

    for user in users:
        b = bandwidths[user]
        h_hat = predict_fn(user, b)
        predicted_before[user] = h_hat
        new_b[user] = b
        if h_hat > params.high_qoe:
            reduced = donor_reduced_bandwidth(user, b, params, predict_fn,
                                              tiers_fn(user))
            released = b - reduced
            surplus += released
            new_b[user] = reduced
            donors[user] = released
        elif h_hat < params.target_qoe:
            deficit = params.target_qoe - h_hat
            deficits[user] = deficit
            total_deficit += deficit

    if total_deficit > 0.0 and surplus > 0.0:
        for user, deficit in deficits.items():
            grant = surplus * deficit / total_deficit
            new_b[user] += grant
            receivers[user] = grant
    else:
        receivers = {user: 0.0 for user in deficits}

    # The prediction at an unchanged bandwidth is unchanged (the predictor
    # is deterministic), so only moved users need a second evaluation.
    predicted_after = {}
    for user in users:
        if new_b[user] == bandwidths[user]:
            predicted_after[user] = predicted_before[user]
        else:
            predicted_after[user] = predict_fn(user, new_b[user])

    return AllocationResult(new_b, donors, receivers, surplus, total_deficit,
                            predicted_before, predicted_after)
