"""6-DoF poses, view-frustum visibility over a cell grid, and the hit-rate metric.

Conventions used everywhere in this package:

* Frames are right-handed.  The camera looks along its local +Z axis,
  with +Y up and +X right (so ry swings the gaze left/right, rx tilts it
  up/down, rz rolls around the gaze direction).
* Orientation is stored as a unit quaternion in (w, x, y, z) order.
* Euler angles (rx, ry, rz) are radians and follow the intrinsic Z-Y-X
  sequence: rz about Z, then ry about the rotated Y, then rx about the
  rotated X.  Angle triples that alias the same rotation are considered
  equivalent; only the rotation matrix matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidPose

CellIndex = tuple[int, int, int]
CellSet = frozenset  # of CellIndex

EULER_SEQUENCES = {"euler-zyx": "ZYX", "euler-xyz": "XYZ"}
QUAT_ORDERS = ("wxyz", "xyzw")

# Default headset-style frustum; the values are configuration, not data.
DEFAULT_HFOV = math.pi / 2
DEFAULT_VFOV = math.pi / 2
DEFAULT_NEAR = 0.05
DEFAULT_FAR = 100.0


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise InvalidPose(f"non-finite {name}: {arr}")
    return arr


def _canonical_quat(quat: np.ndarray) -> np.ndarray:
    """Normalize a (w, x, y, z) quaternion and fix its sign.

    The sign is chosen so the first nonzero component is positive, which
    makes the representation of a rotation unique (q and -q are the same
    rotation).
    """
    norm = float(np.linalg.norm(quat))
    if norm < 1e-12:
        raise InvalidPose("zero-norm quaternion")
    quat = quat / norm
    for component in quat:
        if component != 0.0:
            if component < 0.0:
                quat = -quat
            break
    return quat


@dataclass(frozen=True, eq=False)
class Pose:
    """Device pose: 3-D position in meters plus a unit quaternion."""

    position: np.ndarray
    quat: np.ndarray  # (w, x, y, z), unit norm

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        quat = np.asarray(self.quat, dtype=float).reshape(4)
        if not np.all(np.isfinite(quat)):
            raise InvalidPose(f"non-finite quaternion: {quat}")
        object.__setattr__(self, "quat", _canonical_quat(quat))

    @classmethod
    def from_euler(cls, position, angles, convention: str = "euler-zyx") -> "Pose":
        seq = EULER_SEQUENCES[convention]
        angles = _vec3(angles, "euler angles")
        # scipy orders the angles to match the axis sequence string.
        rot = Rotation.from_euler(seq, angles[::-1] if seq == "ZYX" else angles)
        x, y, z, w = rot.as_quat()
        return cls(position, (w, x, y, z))

    @classmethod
    def from_quat(cls, position, quat, order: str = "wxyz") -> "Pose":
        if order not in QUAT_ORDERS:
            raise InvalidPose(f"unknown quaternion order {order!r}")
        quat = np.asarray(quat, dtype=float).reshape(4)
        if order == "xyzw":
            quat = quat[[3, 0, 1, 2]]
        return cls(position, quat)

    @property
    def rotation(self) -> Rotation:
        w, x, y, z = self.quat
        return Rotation.from_quat((x, y, z, w))

    def rotation_matrix(self) -> np.ndarray:
        """3x3 matrix mapping camera-frame vectors into the world frame."""
        return self.rotation.as_matrix()

    def euler_zyx(self) -> np.ndarray:
        """Angles (rx, ry, rz) of the intrinsic Z-Y-X decomposition."""
        rz, ry, rx = self.rotation.as_euler("ZYX")
        return np.array([rx, ry, rz])

    def as_vector(self) -> np.ndarray:
        """Pose as [px, py, pz, rx, ry, rz] (positions then Euler angles)."""
        return np.concatenate([self.position, self.euler_zyx()])


def canonicalize_pose(position, orientation, convention: str = "euler-zyx") -> Pose:
    """Build a canonical Pose from raw position + orientation columns.

    ``orientation`` is a 3-vector of Euler angles for the ``euler-*``
    conventions or a 4-vector for the ``quaternion-*`` conventions.
    Raises InvalidPose for non-finite input or a zero quaternion.
    """
    if convention in EULER_SEQUENCES:
        return Pose.from_euler(position, orientation, convention)
    if convention == "quaternion-wxyz":
        return Pose.from_quat(position, orientation, "wxyz")
    if convention == "quaternion-xyzw":
        return Pose.from_quat(position, orientation, "xyzw")
    raise InvalidPose(f"unknown rotation convention {convention!r}")


@dataclass(frozen=True)
class Frustum:
    """Symmetric viewing frustum: FOV angles in radians, planes in meters."""

    horizontal_fov: float = DEFAULT_HFOV
    vertical_fov: float = DEFAULT_VFOV
    near: float = DEFAULT_NEAR
    far: float = DEFAULT_FAR

    def __post_init__(self):
        if not (0.0 < self.near < self.far):
            raise ValueError(f"need 0 < near < far, got {self.near}, {self.far}")
        for fov in (self.horizontal_fov, self.vertical_fov):
            if not (0.0 < fov < math.pi):
                raise ValueError(f"fov out of (0, pi): {fov}")

    @property
    def tan_half_h(self) -> float:
        return math.tan(self.horizontal_fov / 2.0)

    @property
    def tan_half_v(self) -> float:
        return math.tan(self.vertical_fov / 2.0)


@dataclass(frozen=True, eq=False)
class CellGrid:
    """Axis-aligned box partitioned into dims = (nx, ny, nz) equal cells."""

    min_corner: np.ndarray
    max_corner: np.ndarray
    dims: tuple[int, int, int] = (4, 4, 2)

    def __post_init__(self):
        object.__setattr__(self, "min_corner", np.asarray(self.min_corner, dtype=float).reshape(3))
        object.__setattr__(self, "max_corner", np.asarray(self.max_corner, dtype=float).reshape(3))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if any(d <= 0 for d in self.dims):
            raise ValueError(f"dims must be strictly positive, got {self.dims}")
        if not np.all(self.max_corner > self.min_corner):
            raise ValueError("max_corner must exceed min_corner on every axis")

    @classmethod
    def from_bounds(cls, bounds: Iterable[float], dims=(4, 4, 2)) -> "CellGrid":
        vals = [float(v) for v in bounds]
        if len(vals) != 6:
            raise ValueError(f"bounds needs 6 numbers, got {len(vals)}")
        return cls(vals[:3], vals[3:], tuple(dims))

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @cached_property
    def cell_size(self) -> np.ndarray:
        return (self.max_corner - self.min_corner) / np.asarray(self.dims, dtype=float)

    @cached_property
    def indices(self) -> tuple[CellIndex, ...]:
        nx, ny, nz = self.dims
        return tuple((i, j, k) for i in range(nx) for j in range(ny) for k in range(nz))

    @cached_property
    def centers(self) -> np.ndarray:
        """(n_cells, 3) array of cell centers, ordered like ``indices``."""
        idx = np.asarray(self.indices, dtype=float)
        return self.min_corner + (idx + 0.5) * self.cell_size

    @cached_property
    def boxes(self) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) corner arrays of every cell box, ordered like ``indices``."""
        idx = np.asarray(self.indices, dtype=float)
        lo = self.min_corner + idx * self.cell_size
        return lo, lo + self.cell_size

    def full_set(self) -> CellSet:
        return frozenset(self.indices)


def _in_frustum_mask(pose: Pose, frustum: Frustum, centers: np.ndarray) -> np.ndarray:
    local = (centers - pose.position) @ pose.rotation_matrix()
    x, y, z = local[:, 0], local[:, 1], local[:, 2]
    return (
        (z >= frustum.near)
        & (z <= frustum.far)
        & (np.abs(x) <= z * frustum.tan_half_h)
        & (np.abs(y) <= z * frustum.tan_half_v)
    )


def _segment_hits_boxes(origin: np.ndarray, target: np.ndarray,
                        lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Slab test of the open segment origin->target against each box.

    Touching a box boundary counts as a hit; the caller excludes boxes
    for which grazing contact should be ignored.
    """
    d = target - origin
    tmin = np.full(lo.shape[0], -np.inf)
    tmax = np.full(lo.shape[0], np.inf)
    for axis in range(3):
        da = d[axis]
        if da == 0.0:
            outside = (origin[axis] < lo[:, axis]) | (origin[axis] > hi[:, axis])
            tmin = np.where(outside, np.inf, tmin)
            tmax = np.where(outside, -np.inf, tmax)
        else:
            t1 = (lo[:, axis] - origin[axis]) / da
            t2 = (hi[:, axis] - origin[axis]) / da
            tmin = np.maximum(tmin, np.minimum(t1, t2))
            tmax = np.minimum(tmax, np.maximum(t1, t2))
    return (tmax >= tmin) & (tmax > 0.0) & (tmin < 1.0)


def visible_cells(pose: Pose, frustum: Frustum, grid: CellGrid,
                  occlusion: bool = True) -> CellSet:
    """Cells whose center is inside the frustum and, optionally, unoccluded.

    A cell is occluded when the open segment from the camera position to
    its center intersects the axis-aligned box of any cell whose center is
    strictly nearer to the camera (the cell's own box never occludes it).
    """
    centers = grid.centers
    mask = _in_frustum_mask(pose, frustum, centers)
    if not occlusion:
        return frozenset(idx for idx, ok in zip(grid.indices, mask) if ok)

    lo, hi = grid.boxes
    dist = np.linalg.norm(centers - pose.position, axis=1)
    out = []
    for cell, ok in zip(range(grid.n_cells), mask):
        if not ok:
            continue
        nearer = dist < dist[cell]
        if np.any(nearer):
            hits = _segment_hits_boxes(pose.position, centers[cell],
                                       lo[nearer], hi[nearer])
            if np.any(hits):
                continue
        out.append(grid.indices[cell])
    return frozenset(out)


def vchr(actual: Pose, predicted: Pose, frustum: Frustum, grid: CellGrid,
         occlusion: bool = True) -> float:
    """Hit rate between the cell sets seen from the actual and predicted poses.

    Intersection over union of the two visible sets; 1.0 when both sets
    are empty (no content exists to misalign).
    """
    seen_actual = visible_cells(actual, frustum, grid, occlusion)
    seen_predicted = visible_cells(predicted, frustum, grid, occlusion)
    union = seen_actual | seen_predicted
    if not union:
        return 1.0
    return len(seen_actual & seen_predicted) / len(union)
