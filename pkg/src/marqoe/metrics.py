"""QoE modeling metrics: MSE and 10-bin category accuracy."""

from __future__ import annotations

from typing import Sequence

from .errors import InvalidInput

N_BINS = 10


def qoe_mse(predicted: Sequence[float], realized: Sequence[float]) -> float:
    if len(predicted) != len(realized) or not predicted:
        raise InvalidInput(
            f"need equal non-empty series, got {len(predicted)} and {len(realized)}")
    return sum((p - r) ** 2 for p, r in zip(predicted, realized)) / len(predicted)


def qoe_bin(value: float) -> int:
    """Equal-width bin index in [0, 9]; 1.0 clamps into the top bin."""
    if not 0.0 <= value <= 1.0:
        raise InvalidInput(f"QoE value {value} outside [0, 1]")
    return min(int(value * N_BINS), N_BINS - 1)


def category_accuracy(predicted: Sequence[float], realized: Sequence[float]) -> float:
    if len(predicted) != len(realized) or not predicted:
        raise InvalidInput(
            f"need equal non-empty series, got {len(predicted)} and {len(realized)}")
    hits = sum(1 for p, r in zip(predicted, realized) if qoe_bin(p) == qoe_bin(r))
    return hits / len(predicted)
