"""Pose-trace ingestion, history resampling, and dataset manifests.

Trace files are plain CSV with a header ``t,px,py,pz,<rotation columns>``
where the rotation columns depend on the convention:

* ``euler-zyx`` / ``euler-xyz``: ``rx,ry,rz`` (radians)
* ``quaternion-wxyz``: ``qw,qx,qy,qz``
* ``quaternion-xyzw``: ``qx,qy,qz,qw``

Manifests are YAML documents listing the dataset name, fps, content grid
bounds (6 numbers) and one ``{id, path, rotation_convention}`` entry per
user.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import re
from dataclasses import dataclass, field

import yaml

from .errors import EmptyTrace, ManifestError, OrderError, OutOfRange, SchemaError
from .geometry import Pose, canonicalize_pose

logger = logging.getLogger(__name__)

SPACING_TOL = 1e-6
USER_ID_PATTERN = re.compile(r"^[A-Za-z0-9_\-]+$")

ROTATION_COLUMNS = {
    "euler-zyx": ("rx", "ry", "rz"),
    "euler-xyz": ("rx", "ry", "rz"),
    "quaternion-wxyz": ("qw", "qx", "qy", "qz"),
    "quaternion-xyzw": ("qx", "qy", "qz", "qw"),
}


@dataclass(frozen=True)
class FrameRecord:
    """One camera frame: capture timestamp (seconds) and device pose."""

    timestamp: float
    pose: Pose


@dataclass(frozen=True)
class UserTrace:
    user_id: str
    fps: float
    frames: tuple[FrameRecord, ...]

    @property
    def start(self) -> float:
        return self.frames[0].timestamp

    @property
    def end(self) -> float:
        return self.frames[-1].timestamp

    @property
    def duration(self) -> float:
        return self.end - self.start + 1.0 / self.fps

    def frame_index(self, t: float) -> int:
        """Index of the frame nearest to time t (clamped to the trace)."""
        idx = round((t - self.start) * self.fps)
        return min(max(idx, 0), len(self.frames) - 1)

    def pose_at(self, t: float) -> Pose:
        return self.frames[self.frame_index(t)].pose

    def frames_between(self, t0: float, t1: float) -> tuple[FrameRecord, ...]:
        """Frames with t0 <= timestamp < t1."""
        return tuple(fr for fr in self.frames if t0 <= fr.timestamp < t1)


@dataclass(frozen=True)
class PoseHistory:
    """Pose samples in (f - window, f], oldest first, ~1/sampling_rate apart."""

    samples: tuple[tuple[float, Pose], ...]
    sampling_rate: float
    window: float

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def newest(self) -> tuple[float, Pose]:
        return self.samples[-1]


@dataclass(frozen=True)
class ManifestEntry:
    user_id: str
    path: str
    rotation_convention: str = "euler-zyx"


@dataclass(frozen=True)
class DatasetManifest:
    dataset: str
    fps: float
    grid_bounds: tuple[float, ...]
    users: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def user_ids(self) -> tuple[str, ...]:
        return tuple(e.user_id for e in self.users)


def _validate_spacing(timestamps: list[float], fps: float) -> None:
    expected = 1.0 / fps
    prev = timestamps[0]
    for t in timestamps[1:]:
        dt = t - prev
        if dt <= 0:
            raise OrderError(f"non-monotone timestamps: {prev} then {t}")
        if abs(dt - expected) > SPACING_TOL:
            raise OrderError(
                f"frame spacing {dt:.9f} deviates from 1/fps={expected:.9f}"
            )
        prev = t


def parse_trace_file(path, column_map: dict | None = None,
                     rotation_convention: str = "euler-zyx",
                     fps: float | None = None,
                     user_id: str | None = None,
                     snap_timestamps: bool = False) -> UserTrace:
    """Load a CSV pose trace into a canonicalized UserTrace.

    ``column_map`` maps the logical column names (t, px, py, pz plus the
    rotation columns of the convention) to the actual file headers; by
    default the logical names are used as-is.  Rows containing non-finite
    values are rejected.  With ``snap_timestamps`` the stamps are replaced
    by ``t0 + i/fps`` provided no stamp deviates more than half a frame.
    """
    if rotation_convention not in ROTATION_COLUMNS:
        raise SchemaError(f"unknown rotation convention {rotation_convention!r}")
    rot_cols = ROTATION_COLUMNS[rotation_convention]
    logical = ("t", "px", "py", "pz") + rot_cols
    column_map = column_map or {}
    actual = [column_map.get(name, name) for name in logical]

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in actual:
            if name not in header:
                raise SchemaError(f"missing column {name!r} in {path}")
        rows = []
        skipped = 0
        for raw in reader:
            try:
                values = [float(raw[name]) for name in actual]
            except (TypeError, ValueError):
                skipped += 1
                continue
            if not all(math.isfinite(v) for v in values):
                skipped += 1
                continue
            rows.append(values)

    if skipped:
        logger.warning("rejected %d non-finite/invalid rows in %s", skipped, path)
    if not rows:
        raise EmptyTrace(f"no usable rows in {path}")

    timestamps = [r[0] for r in rows]
    if fps is None:
        if len(rows) >= 2:
            dt = timestamps[1] - timestamps[0]
            if dt <= 0:
                raise OrderError(f"non-monotone timestamps at start of {path}")
            fps = round(1.0 / dt)
            if fps <= 0:
                raise OrderError(f"cannot infer fps from spacing {dt}")
        else:
            fps = 30.0
    fps = float(fps)

    if snap_timestamps and len(rows) >= 2:
        t0 = timestamps[0]
        for i, t in enumerate(timestamps):
            if abs(t - (t0 + i / fps)) > 0.5 / fps:
                raise OrderError(f"timestamp {t} too far off the {fps} fps lattice")
        timestamps = [t0 + i / fps for i in range(len(rows))]
    if len(rows) >= 2:
        _validate_spacing(timestamps, fps)

    frames = []
    for t, row in zip(timestamps, rows):
        pose = canonicalize_pose(row[1:4], row[4:], rotation_convention)
        frames.append(FrameRecord(t, pose))

    uid = user_id if user_id is not None else os.path.splitext(os.path.basename(path))[0]
    return UserTrace(uid, fps, tuple(frames))


def write_trace_csv(trace: UserTrace, path,
                    rotation_convention: str = "quaternion-wxyz") -> None:
    """Write a trace back to CSV (full float precision, round-trip safe)."""
    if rotation_convention not in ROTATION_COLUMNS:
        raise SchemaError(f"unknown rotation convention {rotation_convention!r}")
    rot_cols = ROTATION_COLUMNS[rotation_convention]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "px", "py", "pz") + rot_cols)
        for fr in trace.frames:
            p = fr.pose
            if rotation_convention == "quaternion-wxyz":
                rot = p.quat
            elif rotation_convention == "quaternion-xyzw":
                rot = p.quat[[1, 2, 3, 0]]
            else:
                rot = p.euler_zyx()
            writer.writerow([repr(float(v))
                             for v in (fr.timestamp, *p.position, *rot)])


def resample_history(trace: UserTrace, f: float, rate: float,
                     window: float) -> PoseHistory:
    """Pose samples at instants f, f - 1/rate, ... inside (f - window, f].

    Each target instant is snapped to the nearest trace frame; instants
    before the trace start are dropped.  Raises OutOfRange when f lies
    outside the trace span.
    """
    if rate <= 0 or window <= 0:
        raise OutOfRange(f"rate and window must be positive: {rate}, {window}")
    slack = 0.5 / trace.fps
    if f < trace.start - 1e-9 or f > trace.end + slack:
        raise OutOfRange(f"f={f} outside trace span [{trace.start}, {trace.end}]")

    samples = []
    k = 0
    while True:
        offset = k / rate
        if offset >= window:
            break
        target = f - offset
        k += 1
        if target < trace.start:
            continue
        fr = trace.frames[trace.frame_index(target)]
        samples.append((fr.timestamp, fr.pose))
    samples.reverse()
    return PoseHistory(tuple(samples), rate, window)


def load_manifest(path) -> DatasetManifest:
    """Load and validate a dataset manifest; trace paths must exist."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"manifest {path} is not a mapping")

    for key in ("dataset", "fps", "grid_bounds", "users"):
        if key not in doc:
            raise ManifestError(f"manifest missing key {key!r}")
    bounds = tuple(float(v) for v in doc["grid_bounds"])
    if len(bounds) != 6:
        raise ManifestError(f"grid_bounds needs 6 numbers, got {len(bounds)}")
    users_doc = doc["users"]
    if not users_doc:
        raise ManifestError("manifest lists no users")

    base = os.path.dirname(os.path.abspath(path))
    entries = []
    seen = set()
    for item in users_doc:
        uid = str(item["id"])
        if not USER_ID_PATTERN.match(uid):
            raise ManifestError(f"unsafe user id {uid!r}")
        if uid in seen:
            raise ManifestError(f"duplicate user id {uid!r}")
        seen.add(uid)
        trace_path = item["path"]
        if not os.path.isabs(trace_path):
            trace_path = os.path.join(base, trace_path)
        if not os.path.isfile(trace_path):
            raise ManifestError(f"trace file missing for {uid!r}: {trace_path}")
        entries.append(ManifestEntry(uid, trace_path,
                                     item.get("rotation_convention", "euler-zyx")))

    return DatasetManifest(str(doc["dataset"]), float(doc["fps"]), bounds,
                           tuple(entries))


def load_trace_for(manifest: DatasetManifest, user_id: str) -> UserTrace:
    for entry in manifest.users:
        if entry.user_id == user_id:
            return parse_trace_file(entry.path,
                                    rotation_convention=entry.rotation_convention,
                                    fps=manifest.fps, user_id=user_id)
    raise ManifestError(f"user {user_id!r} not in manifest")
