"""Per-user wiring of traces, channels and predictors for experiments and tools."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import NotFound
from .geometry import CellGrid, Frustum
from .network import (ChannelConfig, LinkState, QueueParams, link_state,
                      min_bandwidth_for_rate)
from .predict import (KalmanState, PipelineConfig, PredictorConfig,
                      QoEEstimate, epoch_bounds, kalman_update, predict_future_qoe,
                      realized_qoe, usable_epochs)
from .trace import DatasetManifest, UserTrace, load_trace_for


@dataclass
class UserSim:
    """Mutable per-user state: trace, pipeline config, scalar bias filter."""

    user_id: str
    trace: UserTrace
    pipeline: PipelineConfig
    scalar_filter: KalmanState


class SimulationContext:
    """Holds every user's pipeline and answers QoE queries against it.

    Tool servers and the experiment loop share this object; all methods are
    deterministic given the construction inputs.  Per-user overrides (e.g.
    a different mean SNR or base model) are applied on top of the shared
    configs at construction time.
    """

    def __init__(self, manifest: DatasetManifest, frustum: Frustum,
                 grid: CellGrid, predictor: PredictorConfig,
                 channel: ChannelConfig, queue: QueueParams,
                 rate_candidates, occlusion: bool = True,
                 epoch_len: float = 1.0, seed: int = 0,
                 total_bandwidth: float = 1.0e8,
                 user_overrides: dict | None = None):
        self.manifest = manifest
        self.queue = queue
        self.total_bandwidth = total_bandwidth
        self.seed = seed
        self.users: dict[str, UserSim] = {}
        self._tier_cache: dict[str, tuple[float, ...]] = {}
        overrides = user_overrides or {}

        for index, entry in enumerate(manifest.users):
            ov = overrides.get(entry.user_id, {})
            user_channel = replace(
                channel,
                mean_snr=float(ov.get("mean_snr", channel.mean_snr)),
                seed=int(ov.get("channel_seed", seed + index)))
            user_predictor = replace(
                predictor,
                base_model=ov.get("base_model", predictor.base_model))
            pipeline = PipelineConfig(
                frustum=frustum, grid=grid, predictor=user_predictor,
                channel=user_channel, queue=queue,
                rate_candidates=tuple(rate_candidates), occlusion=occlusion,
                epoch_len=epoch_len)
            trace = load_trace_for(manifest, entry.user_id)
            self.users[entry.user_id] = UserSim(
                entry.user_id, trace, pipeline,
                KalmanState(0.0, predictor.kalman.initial_variance))

    def user(self, user_id: str) -> UserSim:
        try:
            return self.users[user_id]
        except KeyError:
            raise NotFound(f"unknown user {user_id!r}") from None

    def user_ids(self) -> list[str]:
        return sorted(self.users)

    def n_epochs(self) -> int:
        return min(usable_epochs(u.trace, u.pipeline) for u in self.users.values())

    def epoch_bounds(self, user_id: str, epoch: int) -> tuple[float, float]:
        u = self.user(user_id)
        return epoch_bounds(u.trace, epoch, u.pipeline.epoch_len)

    def predict(self, user_id: str, bandwidth_hz: float, epoch: int) -> QoEEstimate:
        u = self.user(user_id)
        return predict_future_qoe(u.trace, bandwidth_hz, epoch, u.pipeline,
                                  u.scalar_filter)

    def realized(self, user_id: str, bandwidth_hz: float, epoch: int,
                 bank=None) -> QoEEstimate:
        u = self.user(user_id)
        t0, t1 = epoch_bounds(u.trace, epoch, u.pipeline.epoch_len)
        return realized_qoe(u.trace, bandwidth_hz, t0, t1, u.pipeline,
                            bank=bank, epoch=epoch)

    def observe(self, user_id: str, predicted: float, realized: float) -> None:
        """Feed one (predicted, realized) pair to the user's scalar filter."""
        u = self.user(user_id)
        u.scalar_filter = kalman_update(u.scalar_filter, realized - predicted,
                                        u.pipeline.predictor.kalman)

    def tier_bandwidths(self, user_id: str) -> tuple[float, ...]:
        """Minimal bandwidth per candidate sampling rate, ascending."""
        cached = self._tier_cache.get(user_id)
        if cached is not None:
            return cached
        u = self.user(user_id)
        tiers = []
        for rate in sorted(u.pipeline.rate_candidates):
            tiers.append(min_bandwidth_for_rate(
                rate, u.pipeline.channel, self.queue,
                ceiling_hz=10.0 * self.total_bandwidth))
        tiers = tuple(tiers)
        self._tier_cache[user_id] = tiers
        return tiers

    def link_state(self, user_id: str, bandwidth_hz: float) -> LinkState:
        u = self.user(user_id)
        return link_state(user_id, bandwidth_hz, u.pipeline.channel, self.queue,
                          u.pipeline.rate_candidates)
