"""Seeded synthetic 6-DoF traces so experiments never need the external dataset.

Motion profiles:

* ``stationary``  fixed pose
* ``linear``      constant-velocity translation, fixed orientation
* ``walk``        AR(1)-smoothed random walk in velocity and angular velocity
* ``drift``       constant acceleration (gives a constant prediction offset
                  for linear base models, used by the bias-correction tests)
* ``sweep``       fixed position, sinusoidal pan whose amplitude grows over
                  time, so per-epoch hit rate degrades steadily
"""

from __future__ import annotations

import math
import os

import numpy as np
import yaml

from .geometry import Pose
from .trace import FrameRecord, UserTrace, write_trace_csv

PROFILES = ("stationary", "linear", "walk", "drift", "sweep")


def synth_trace(user_id: str, profile: str = "walk", duration: float = 10.0,
                fps: float = 30.0, seed: int = 0,
                position=(0.0, 0.0, 0.0), yaw: float = 0.0,
                velocity=(0.0, 0.0, 0.0), acceleration=(0.0, 0.0, 0.0),
                walk_speed: float = 0.5, turn_rate: float = 0.6,
                smoothness: float = 0.97,
                sweep_amplitude: float = 0.2, sweep_growth: float = 0.05,
                sweep_period: float = 1.3) -> UserTrace:
    """Generate a deterministic synthetic trace.

    ``walk_speed`` scales the translational wander (m/s RMS), ``turn_rate``
    the yaw/pitch wander (rad/s RMS); ``smoothness`` in [0, 1) is the AR(1)
    correlation between consecutive velocity samples.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    rng = np.random.default_rng(seed)
    n = int(round(duration * fps))
    dt = 1.0 / fps

    pos = np.asarray(position, dtype=float).copy()
    vel = np.asarray(velocity, dtype=float).copy()
    acc = np.asarray(acceleration, dtype=float)
    # The camera gazes along +Z: ry turns it left/right, rx up/down.
    angles = np.array([0.0, yaw, 0.0])  # (rx, ry, rz)
    ang_vel = np.zeros(2)               # (rx rate, ry rate); roll stays 0
    noise_scale = np.sqrt(max(1.0 - smoothness**2, 0.0))

    frames = []
    for i in range(n):
        t = i / fps
        if profile == "sweep":
            amp = sweep_amplitude + sweep_growth * t
            angles = np.array([0.0, yaw + amp * math.sin(2.0 * math.pi * t
                                                         / sweep_period), 0.0])
        frames.append(FrameRecord(t, Pose.from_euler(pos, angles)))
        if profile in ("stationary", "sweep"):
            continue
        if profile == "linear":
            pos = pos + vel * dt
        elif profile == "drift":
            vel = vel + acc * dt
            pos = pos + vel * dt
        else:  # walk
            vel = smoothness * vel + noise_scale * rng.normal(0.0, walk_speed, 3)
            ang_vel = smoothness * ang_vel + noise_scale * rng.normal(0.0, turn_rate, 2)
            pos = pos + vel * dt
            angles = angles + np.array([ang_vel[0], ang_vel[1], 0.0]) * dt
    return UserTrace(user_id, fps, tuple(frames))


def write_scenario(out_dir: str, users: list[dict], grid_bounds,
                   dataset: str = "synthetic", fps: float = 30.0) -> str:
    """Write trace CSVs plus a manifest for a synthetic scenario.

    Each entry of ``users`` is a dict of ``synth_trace`` keyword arguments
    plus the mandatory ``user_id``.  Returns the manifest path.
    """
    os.makedirs(out_dir, exist_ok=True)
    trace_dir = os.path.join(out_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)

    entries = []
    for spec in users:
        spec = dict(spec)
        uid = spec.pop("user_id")
        trace = synth_trace(uid, fps=fps, **spec)
        rel = os.path.join("traces", f"{uid}.csv")
        write_trace_csv(trace, os.path.join(out_dir, rel), "quaternion-wxyz")
        entries.append({"id": uid, "path": rel,
                        "rotation_convention": "quaternion-wxyz"})

    manifest = {
        "dataset": dataset,
        "fps": fps,
        "grid_bounds": [float(v) for v in grid_bounds],
        "users": entries,
    }
    manifest_path = os.path.join(out_dir, "manifest.yaml")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=True)
    return manifest_path


def mixed_mobility_scenario(out_dir: str, seed: int = 7) -> str:
    """The bundled five-user scenario: two calm users, three restless ones.

    The content box is wider than the viewing frustum, so each pose sees a
    window of the cell grid and orientation errors shift that window.
    Restless users turn briskly; calm users barely move.
    """
    grid_bounds = [-3.0, -1.5, 1.0, 3.0, 1.5, 3.0]
    home = (0.0, 0.0, -0.5)
    users = [
        {"user_id": "P01", "profile": "walk", "seed": seed + 1,
         "walk_speed": 0.3, "turn_rate": 1.5, "smoothness": 0.90},
        {"user_id": "P02", "profile": "stationary", "seed": seed + 2},
        {"user_id": "P03", "profile": "walk", "seed": seed + 3,
         "walk_speed": 0.02, "turn_rate": 0.03, "smoothness": 0.99},
        {"user_id": "P04", "profile": "walk", "seed": seed + 4,
         "walk_speed": 0.35, "turn_rate": 1.8, "smoothness": 0.88},
        {"user_id": "P05", "profile": "walk", "seed": seed + 5,
         "walk_speed": 0.3, "turn_rate": 1.6, "smoothness": 0.90},
    ]
    for spec in users:
        spec.setdefault("duration", 12.0)
        spec.setdefault("position", home)
    return write_scenario(out_dir, users, grid_bounds, dataset="synthetic-mixed-5")
