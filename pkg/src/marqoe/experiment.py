"""Epoch-loop experiment runner and report emission (CSV + SVG bars).

Each recorded epoch e >= 1: predict every user's QoE at the allocation
entering the epoch, optionally reallocate, then evaluate realized QoE over
the same epoch at both the old ("before") and new ("after") allocations so
the comparison is apples-to-apples on identical trace segments.  Epoch 0
only warms the history window and is not recorded.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace

import yaml

from .allocate import AllocationParams, objective, reallocate
from .errors import ConfigError, InvalidInput
from .geometry import CellGrid, Frustum
from .metrics import category_accuracy, qoe_mse
from .network import DEFAULT_RATE_CANDIDATES, ChannelConfig, QueueParams
from .predict import KalmanParams, PredictorConfig
from .simulation import SimulationContext
from .trace import load_manifest
from .ucr import UserContextRecord, UserContextStore

REPORT_HEADER = ("epoch", "user", "method", "bandwidth_hz", "predicted_qoe",
                 "realized_before", "realized_after", "role")


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str
    out_dir: str = "out"
    seed: int = 0
    epoch_len: float = 1.0
    epochs: int | None = None            # None: every usable epoch
    method: str = "agent"
    reallocation: bool = True
    initial_allocation: dict | None = None  # user -> Hz; None: uniform
    alloc: AllocationParams = field(default_factory=AllocationParams)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    queue: QueueParams = field(default_factory=QueueParams)
    rate_candidates: tuple[float, ...] = DEFAULT_RATE_CANDIDATES
    frustum: Frustum = field(default_factory=Frustum)
    grid_dims: tuple[int, int, int] = (4, 4, 2)
    occlusion: bool = True
    user_overrides: dict = field(default_factory=dict)
    ucr_dir: str | None = None           # default: <out_dir>/ucr


_NESTED_SECTIONS = {
    "alloc": AllocationParams,
    "predictor": PredictorConfig,
    "channel": ChannelConfig,
    "queue": QueueParams,
    "frustum": Frustum,
}


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a plain key/value tree."""
    doc = dict(doc or {})
    kwargs = {}
    for key, cls in _NESTED_SECTIONS.items():
        section = doc.pop(key, None)
        if section is not None:
            if key == "predictor" and "kalman" in section:
                section = dict(section)
                section["kalman"] = KalmanParams(**section["kalman"])
            kwargs[key] = cls(**section)
    for key in ("rate_candidates", "grid_dims"):
        if key in doc:
            doc[key] = tuple(doc[key])
    known = ExperimentConfig.__dataclass_fields__
    unknown = [k for k in doc if k not in known]
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    try:
        return ExperimentConfig(**doc, **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None, **overrides) -> ExperimentConfig:
    """Load a YAML experiment config; keyword overrides win over the file."""
    doc = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} is not a mapping")
    cfg = config_from_dict(doc)
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    alloc_over = {k: cleaned.pop(k) for k in ("target_qoe", "high_qoe",
                                              "total_bandwidth") if k in cleaned}
    if alloc_over:
        cfg = replace(cfg, alloc=replace(cfg.alloc, **alloc_over))
    if cleaned:
        cfg = replace(cfg, **cleaned)
    return cfg


def echo_config(cfg: ExperimentConfig, path: str) -> None:
    """Write the effective config next to the outputs for provenance."""
    doc = asdict(cfg)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    user: str
    method: str
    bandwidth_hz: float
    predicted_qoe: float
    realized_before: float
    realized_after: float
    role: str


@dataclass
class ExperimentReport:
    records: list[EpochRecord]
    summary: dict

    def users(self) -> list[str]:
        return sorted({r.user for r in self.records})

    def per_user_means(self) -> list[tuple[str, float, float]]:
        out = []
        for user in self.users():
            rows = [r for r in self.records if r.user == user]
            out.append((user,
                        sum(r.realized_before for r in rows) / len(rows),
                        sum(r.realized_after for r in rows) / len(rows)))
        return out


def build_context(cfg: ExperimentConfig) -> SimulationContext:
    manifest = load_manifest(cfg.manifest)
    grid = CellGrid.from_bounds(manifest.grid_bounds, cfg.grid_dims)
    return SimulationContext(
        manifest, cfg.frustum, grid, cfg.predictor, cfg.channel, cfg.queue,
        cfg.rate_candidates, occlusion=cfg.occlusion, epoch_len=cfg.epoch_len,
        seed=cfg.seed, total_bandwidth=cfg.alloc.total_bandwidth,
        user_overrides=cfg.user_overrides)


def initial_bandwidths(cfg: ExperimentConfig, users: list[str]) -> dict[str, float]:
    if cfg.initial_allocation is not None:
        missing = set(users) - set(cfg.initial_allocation)
        if missing:
            raise ConfigError(f"initial allocation missing users {sorted(missing)}")
        alloc = {u: float(cfg.initial_allocation[u]) for u in users}
    else:
        alloc = {u: cfg.alloc.total_bandwidth / len(users) for u in users}
    total = sum(alloc.values())
    if total > cfg.alloc.total_bandwidth * (1 + 1e-9):
        raise ConfigError(
            f"initial allocation {total:.0f} Hz exceeds budget "
            f"{cfg.alloc.total_bandwidth:.0f} Hz")
    return alloc


def run_experiment(cfg: ExperimentConfig,
                   ucr: UserContextStore | None = None) -> ExperimentReport:
    """Run the epoch loop; deterministic for a fixed config and seed."""
    ctx = build_context(cfg)
    users = ctx.user_ids()
    bandwidths = initial_bandwidths(cfg, users)

    if ucr is None:
        ucr = UserContextStore(cfg.ucr_dir or os.path.join(cfg.out_dir, "ucr"))
    manifest = ctx.manifest
    for entry in manifest.users:
        ov = cfg.user_overrides.get(entry.user_id, {})
        ucr.put(UserContextRecord(
            user_id=entry.user_id, dataset=manifest.dataset,
            trace_path=entry.path, grid_bounds=manifest.grid_bounds,
            predictor_overrides={k: v for k, v in ov.items() if k == "base_model"},
            channel_overrides={k: v for k, v in ov.items() if k != "base_model"}))

    n_epochs = ctx.n_epochs()
    if n_epochs < 2:
        raise ConfigError(f"traces cover only {n_epochs} epoch(s); need >= 2")
    last = n_epochs - 1
    if cfg.epochs is not None:
        last = min(last, cfg.epochs)

    records: list[EpochRecord] = []
    for epoch in range(1, last + 1):
        old = dict(bandwidths)
        if cfg.reallocation:
            result = reallocate(
                old, cfg.alloc,
                predict_fn=lambda u, b: ctx.predict(u, b, epoch).value,
                tiers_fn=ctx.tier_bandwidths)
            new = result.new_bandwidths
        else:
            result = None
            new = old

        for user in users:
            before = ctx.realized(user, old[user], epoch).value
            if new[user] == old[user]:
                after = before
                predicted = (result.predicted_before[user] if result
                             else ctx.predict(user, old[user], epoch).value)
            else:
                after = ctx.realized(user, new[user], epoch).value
                predicted = result.predicted_after[user]
            role = result.role_of(user) if result else "untouched"
            ctx.observe(user, predicted, after)
            ucr.history_append(user, epoch, new[user], predicted, after)
            records.append(EpochRecord(epoch, user, cfg.method, new[user],
                                       predicted, before, after, role))
        bandwidths = new

    return ExperimentReport(records, summarize(records, bandwidths, cfg.alloc))


def summarize(records: list[EpochRecord], final_bandwidths: dict[str, float],
              alloc: AllocationParams) -> dict:
    predicted = [r.predicted_qoe for r in records]
    realized = [r.realized_after for r in records]
    users = sorted(final_bandwidths)
    per_user_after = {
        u: [r.realized_after for r in records if r.user == u] for u in users}
    return {
        "epochs": len({r.epoch for r in records}),
        "users": len(users),
        "h_tar": alloc.target_qoe,
        "h_hig": alloc.high_qoe,
        "mean_qoe_before": sum(r.realized_before for r in records) / len(records),
        "mean_qoe_after": sum(realized) / len(records),
        "mse": qoe_mse(predicted, realized),
        "category_accuracy": category_accuracy(predicted, realized),
        "objective": objective(
            [final_bandwidths[u] for u in users],
            [sum(v) / len(v) for v in (per_user_after[u] for u in users)],
            alloc),
        "total_bandwidth_hz": sum(final_bandwidths.values()),
    }


def write_report_csv(report: ExperimentReport, path: str) -> None:
    """One row per (epoch, user); floats via repr for byte-stable output."""
    lines = [",".join(REPORT_HEADER)]
    for r in report.records:
        lines.append(",".join([
            str(r.epoch), r.user, r.method, repr(float(r.bandwidth_hz)),
            repr(float(r.predicted_qoe)), repr(float(r.realized_before)),
            repr(float(r.realized_after)), r.role]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report_csv(path: str) -> list[EpochRecord]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or tuple(lines[0].split(",")) != REPORT_HEADER:
        raise InvalidInput(f"{path} is not a report CSV")
    records = []
    for ln in lines[1:]:
        epoch, user, method, b, pred, before, after, role = ln.split(",")
        records.append(EpochRecord(int(epoch), user, method, float(b),
                                   float(pred), float(before), float(after),
                                   role))
    return records


def write_report_svg(report: ExperimentReport, path: str) -> None:
    """Grouped before/after mean-QoE bars, two per user, deterministic bytes."""
    means = report.per_user_means()
    bar_w, gap, group_gap, height, base = 28, 4, 26, 220, 30
    chart_h = height - 2 * base
    width = group_gap + len(means) * (2 * bar_w + gap + group_gap)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="sans-serif" font-size="10">',
        f'<line x1="{group_gap}" y1="{height - base}" x2="{width - 6}" '
        f'y2="{height - base}" stroke="black"/>',
    ]
    x = group_gap
    for user, before, after in means:
        for value, color in ((before, "#8c564b"), (after, "#2ca02c")):
            h = chart_h * value
            y = height - base - h
            parts.append(
                f'<rect x="{x}" y="{y:.2f}" width="{bar_w}" height="{h:.2f}" '
                f'fill="{color}"/>')
            parts.append(
                f'<text x="{x + bar_w / 2:.1f}" y="{y - 3:.2f}" '
                f'text-anchor="middle">{value:.2f}</text>')
            x += bar_w + gap
        parts.append(
            f'<text x="{x - bar_w - gap / 2:.1f}" y="{height - base + 14}" '
            f'text-anchor="middle">{user}</text>')
        x += group_gap - gap
    parts.append(
        f'<text x="{group_gap}" y="{height - 6}">before (brown) / after (green), '
        f'mean QoE per user</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_report(report: ExperimentReport, out_dir: str,
                formats=("csv", "svg-bars"), stem: str = "report") -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = os.path.join(out_dir, f"{stem}.csv")
            write_report_csv(report, path)
        elif fmt == "svg-bars":
            path = os.path.join(out_dir, f"{stem}.svg")
            write_report_svg(report, path)
        else:
            raise InvalidInput(f"unknown report format {fmt!r}")
        written.append(path)
    summary_path = os.path.join(out_dir, f"{stem}_summary.yaml")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(report.summary, fh, sort_keys=True)
    written.append(summary_path)
    return written
