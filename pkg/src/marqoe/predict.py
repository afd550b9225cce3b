"""Pose prediction, Kalman bias correction, and the bandwidth -> QoE pipeline.

Base models predict the pose a lookahead ``W`` seconds past the newest
history sample.  A bank of six scalar Kalman filters (three position
components, three Euler orientation components) tracks the slowly varying
bias of the base model; an optional seventh scalar filter corrects the
QoE estimate itself.  Each filter runs the random-walk form

    P- = P + Q,  K = P- / (P- + R),  bias += K * e,  P = (1 - K) * P-

where the innovation ``e`` is the observed error of the *corrected*
prediction, i.e. a direct measurement of the residual bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import NoHistory, OutOfRange
from .geometry import CellGrid, Frustum, Pose, vchr
from .network import (DEFAULT_RATE_CANDIDATES, ChannelConfig, QueueParams,
                      max_sampling_rate)
from .trace import PoseHistory, UserTrace, resample_history

BASE_MODELS = ("constant-velocity", "last-value")
CORRECTION_TARGETS = ("pose", "qoe-scalar", "both", "none")


@dataclass(frozen=True)
class KalmanParams:
    process_noise: float = 1e-4      # Q, variance added per step
    measurement_noise: float = 1e-2  # R
    initial_variance: float = 1.0    # P0

    def __post_init__(self):
        if min(self.process_noise, self.measurement_noise,
               self.initial_variance) <= 0:
            raise ValueError("Kalman parameters must be strictly positive")


@dataclass(frozen=True)
class KalmanState:
    bias: float = 0.0
    variance: float = 1.0


def kalman_update(state: KalmanState, observed_error: float,
                  params: KalmanParams) -> KalmanState:
    """One predict+update step of the random-walk bias filter."""
    if not math.isfinite(observed_error):
        raise ValueError(f"non-finite observed error {observed_error}")
    p_prior = state.variance + params.process_noise
    gain = p_prior / (p_prior + params.measurement_noise)
    return KalmanState(state.bias + gain * observed_error,
                       (1.0 - gain) * p_prior)


def kalman_fixed_point(params: KalmanParams) -> tuple[float, float]:
    """Steady-state (variance, gain) of the scalar random-walk filter."""
    q, r = params.process_noise, params.measurement_noise
    p_star = 0.5 * (-q + math.sqrt(q * q + 4.0 * q * r))
    gain = (p_star + q) / (p_star + q + r)
    return p_star, gain


def new_bank(params: KalmanParams, size: int = 6) -> list[KalmanState]:
    return [KalmanState(0.0, params.initial_variance) for _ in range(size)]


@dataclass(frozen=True)
class PredictorConfig:
    base_model: str = "constant-velocity"
    lookahead: float = 0.1        # W, seconds
    history_window: float = 1.0   # H, seconds
    kalman: KalmanParams = field(default_factory=KalmanParams)
    correction_target: str = "both"

    def __post_init__(self):
        if self.base_model not in BASE_MODELS:
            raise ValueError(f"unknown base model {self.base_model!r}")
        if self.correction_target not in CORRECTION_TARGETS:
            raise ValueError(f"unknown correction target {self.correction_target!r}")
        if self.lookahead <= 0 or self.history_window <= 0:
            raise ValueError("lookahead and history_window must be positive")

    @property
    def corrects_pose(self) -> bool:
        return self.correction_target in ("pose", "both")

    @property
    def corrects_qoe(self) -> bool:
        return self.correction_target in ("qoe-scalar", "both")


@dataclass(frozen=True)
class QoEEstimate:
    user_id: str
    bandwidth_hz: float
    epoch: int
    value: float
    kind: str  # "predicted" | "realized"


def _fit_line(times: np.ndarray, values: np.ndarray, at: float) -> np.ndarray:
    """Evaluate the least-squares line through (times, values) at ``at``.

    Closed-form two-parameter regression per column; deterministic (no
    LAPACK involved).
    """
    t_mean = times.mean()
    centered = times - t_mean
    denom = float(np.dot(centered, centered))
    v_mean = values.mean(axis=0)
    if denom == 0.0:
        return v_mean
    slope = centered @ (values - v_mean) / denom
    return v_mean + slope * (at - t_mean)


def predict_pose_base(history: PoseHistory, lookahead: float,
                      model: str = "constant-velocity") -> Pose:
    """Predict the pose ``lookahead`` seconds after the newest sample."""
    if not history.samples:
        raise NoHistory("empty pose history")
    t_new, newest = history.newest
    if model == "last-value" or len(history) == 1:
        return newest

    times = np.array([t for t, _ in history.samples])
    positions = np.array([p.position for _, p in history.samples])
    position = _fit_line(times - t_new, positions, lookahead)

    # Orientation: mean angular velocity over consecutive sample pairs,
    # applied for the lookahead on top of the newest orientation.
    omegas = []
    for (t0, p0), (t1, p1) in zip(history.samples, history.samples[1:]):
        dt = t1 - t0
        if dt <= 0:
            continue
        rel = p1.rotation * p0.rotation.inv()
        omegas.append(rel.as_rotvec() / dt)
    if omegas:
        step = Rotation.from_rotvec(np.mean(omegas, axis=0) * lookahead)
        rot = step * newest.rotation
        x, y, z, w = rot.as_quat()
        return Pose(position, (w, x, y, z))
    return Pose(position, newest.quat)


def apply_pose_bias(pose: Pose, bank: list[KalmanState]) -> Pose:
    """Add the six filter biases: position directly, orientation via Euler."""
    position = pose.position + np.array([s.bias for s in bank[:3]])
    euler = pose.euler_zyx() + np.array([s.bias for s in bank[3:6]])
    return Pose.from_euler(position, euler)


def pose_error(truth: Pose, predicted: Pose) -> np.ndarray:
    """Component-wise error [dx, dy, dz, drx, dry, drz], angles wrapped."""
    dp = truth.position - predicted.position
    da = truth.euler_zyx() - predicted.euler_zyx()
    da = (da + math.pi) % (2.0 * math.pi) - math.pi
    return np.concatenate([dp, da])


def predict_pose_corrected(history: PoseHistory, lookahead: float,
                           bank: list[KalmanState],
                           model: str = "constant-velocity") -> Pose:
    return apply_pose_bias(predict_pose_base(history, lookahead, model), bank)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the QoE pipeline needs besides the trace itself."""

    frustum: Frustum
    grid: CellGrid
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    queue: QueueParams = field(default_factory=QueueParams)
    rate_candidates: tuple[float, ...] = DEFAULT_RATE_CANDIDATES
    occlusion: bool = True
    epoch_len: float = 1.0


def epoch_bounds(trace: UserTrace, epoch: int, epoch_len: float) -> tuple[float, float]:
    t0 = trace.start + epoch * epoch_len
    return t0, t0 + epoch_len


def usable_epochs(trace: UserTrace, cfg: PipelineConfig) -> int:
    """Number of whole epochs with at least one frame evaluable at f + W."""
    total = int(math.floor(trace.duration / cfg.epoch_len + 1e-9))
    last_eval = trace.end + 0.5 / trace.fps - cfg.predictor.lookahead
    while total > 0:
        t0, t1 = epoch_bounds(trace, total - 1, cfg.epoch_len)
        if any(fr.timestamp <= last_eval for fr in trace.frames_between(t0, t1)):
            break
        total -= 1
    return total


def realized_qoe(trace: UserTrace, bandwidth_hz: float, t0: float, t1: float,
                 cfg: PipelineConfig, bank: list[KalmanState] | None = None,
                 epoch: int = 0) -> QoEEstimate:
    """Mean hit rate over the frames of [t0, t1) at a given bandwidth.

    The sampling rate is the largest feasible candidate for the bandwidth
    (no feasible rate -> 0.0: nothing is uploaded, nothing aligns).  For
    each frame the pose at f + W is predicted from the resampled history,
    bias-corrected when enabled, scored against the true pose, and the
    filters are updated with the observed error.  Passing ``bank`` carries
    filter state across calls; it is updated in place.
    """
    pred = cfg.predictor
    slack = 0.5 / trace.fps
    if t0 < trace.start - 1e-9 or t1 > trace.end + 1.0 / trace.fps + slack:
        raise OutOfRange(f"epoch [{t0}, {t1}) outside trace span")

    rate = max_sampling_rate(bandwidth_hz, cfg.channel, cfg.queue,
                             cfg.rate_candidates)
    if rate is None:
        return QoEEstimate(trace.user_id, bandwidth_hz, epoch, 0.0, "realized")

    if bank is None:
        bank = new_bank(pred.kalman)
    scores = []
    for frame in trace.frames_between(t0, t1):
        f = frame.timestamp
        if f + pred.lookahead > trace.end + slack:
            continue
        history = resample_history(trace, f, rate, pred.history_window)
        base = predict_pose_base(history, pred.lookahead, pred.base_model)
        predicted = apply_pose_bias(base, bank) if pred.corrects_pose else base
        truth = trace.pose_at(f + pred.lookahead)
        scores.append(vchr(truth, predicted, cfg.frustum, cfg.grid, cfg.occlusion))
        if pred.corrects_pose:
            errors = pose_error(truth, predicted)
            for i in range(6):
                bank[i] = kalman_update(bank[i], errors[i], pred.kalman)
    if not scores:
        raise OutOfRange(f"no evaluable frames in [{t0}, {t1})")
    return QoEEstimate(trace.user_id, bandwidth_hz, epoch,
                       float(np.mean(scores)), "realized")


def predict_future_qoe(trace: UserTrace, bandwidth_hz: float, epoch: int,
                       cfg: PipelineConfig,
                       scalar_state: KalmanState | None = None) -> QoEEstimate:
    """Predicted mean hit rate for ``epoch`` at a candidate bandwidth.

    Trailing-window proxy: the realized pipeline is replayed over the most
    recent completed epoch (with fresh pose filters, so the replay is
    exactly that epoch's realized computation), then the scalar bias filter
    learned from past (predicted, realized) pairs is added and the result
    clamped to [0, 1].
    """
    if epoch < 1:
        raise NoHistory(f"epoch {epoch} has no completed epoch before it")
    t0, t1 = epoch_bounds(trace, epoch - 1, cfg.epoch_len)
    proxy = realized_qoe(trace, bandwidth_hz, t0, t1, cfg)
    value = proxy.value
    if cfg.predictor.corrects_qoe and scalar_state is not None:
        value = min(max(value + scalar_state.bias, 0.0), 1.0)
    return QoEEstimate(trace.user_id, bandwidth_hz, epoch, value, "predicted")
