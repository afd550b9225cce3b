"""Hand-coded reference implementations used as independent test oracles.

Everything here is deliberately written from the mathematical definitions
with scalar arithmetic (no scipy, no shared code with the package) so the
production paths are checked by a second, independent route.
"""

import math

import numpy as np


# -- rotations ---------------------------------------------------------------

def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def matrix_euler_zyx(rx, ry, rz):
    """Intrinsic Z-Y-X: yaw about Z, pitch about the new Y, roll about the new X."""
    return rot_z(rz) @ rot_y(ry) @ rot_x(rx)


def matrix_euler_xyz(rx, ry, rz):
    return rot_x(rx) @ rot_y(ry) @ rot_z(rz)


def matrix_from_quat_wxyz(w, x, y, z):
    n = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


# -- frustum visibility ------------------------------------------------------

def point_in_frustum(point, cam_pos, cam_matrix, frustum):
    """Scalar test of a world point against the six frustum planes."""
    rel = [point[i] - cam_pos[i] for i in range(3)]
    # world -> camera: multiply by the transpose (columns of cam_matrix are
    # the camera axes expressed in world coordinates)
    x = sum(cam_matrix[i][0] * rel[i] for i in range(3))
    y = sum(cam_matrix[i][1] * rel[i] for i in range(3))
    z = sum(cam_matrix[i][2] * rel[i] for i in range(3))
    if z < frustum.near or z > frustum.far:
        return False
    if abs(x) > z * math.tan(frustum.horizontal_fov / 2.0):
        return False
    if abs(y) > z * math.tan(frustum.vertical_fov / 2.0):
        return False
    return True


def segment_hits_box(p, q, lo, hi):
    """Scalar slab test: does the open segment p->q meet the closed box?"""
    tmin, tmax = -math.inf, math.inf
    for axis in range(3):
        d = q[axis] - p[axis]
        if d == 0.0:
            if p[axis] < lo[axis] or p[axis] > hi[axis]:
                return False
            continue
        t1 = (lo[axis] - p[axis]) / d
        t2 = (hi[axis] - p[axis]) / d
        if t1 > t2:
            t1, t2 = t2, t1
        tmin = max(tmin, t1)
        tmax = min(tmax, t2)
    return tmax >= tmin and tmax > 0.0 and tmin < 1.0


def grid_cells(grid):
    """(index, center, lo, hi) for every cell, from first principles."""
    nx, ny, nz = grid.dims
    size = [(grid.max_corner[a] - grid.min_corner[a]) / grid.dims[a]
            for a in range(3)]
    cells = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                lo = [grid.min_corner[0] + i * size[0],
                      grid.min_corner[1] + j * size[1],
                      grid.min_corner[2] + k * size[2]]
                hi = [lo[a] + size[a] for a in range(3)]
                center = [lo[a] + 0.5 * size[a] for a in range(3)]
                cells.append(((i, j, k), center, lo, hi))
    return cells


def brute_force_visible(pose, frustum, grid, occlusion):
    """Per-center plane tests plus pairwise segment-vs-box occlusion."""
    cam_pos = [float(v) for v in pose.position]
    cam_matrix = matrix_from_quat_wxyz(*pose.quat)
    cells = grid_cells(grid)
    in_view = [c for c in cells
               if point_in_frustum(c[1], cam_pos, cam_matrix, frustum)]
    if not occlusion:
        return frozenset(c[0] for c in in_view)

    def dist2(center):
        return sum((center[a] - cam_pos[a]) ** 2 for a in range(3))

    visible = []
    for idx, center, _, _ in in_view:
        d_target = dist2(center)
        blocked = False
        for other_idx, other_center, lo, hi in cells:
            if other_idx == idx or dist2(other_center) >= d_target:
                continue
            if segment_hits_box(cam_pos, center, lo, hi):
                blocked = True
                break
        if not blocked:
            visible.append(idx)
    return frozenset(visible)


def brute_force_vchr(actual, predicted, frustum, grid, occlusion):
    a = brute_force_visible(actual, frustum, grid, occlusion)
    b = brute_force_visible(predicted, frustum, grid, occlusion)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


# -- queueing ----------------------------------------------------------------

def lindley_sojourn_mean(interarrival, service_times):
    """Mean sojourn of a FIFO single-server queue via the Lindley recursion."""
    wait = 0.0
    total = 0.0
    for s in service_times:
        total += wait + s
        wait = max(0.0, wait + s - interarrival)
    return total / len(service_times)


def dg1_delay_formula(rate, mean, second_moment):
    return mean + rate * second_moment / (2.0 * (1.0 - rate * mean))


def min_bandwidth_closed_form(rate, snr, frame_bits, max_delay):
    """Exact inversion of the delay bound for a constant-SNR channel.

    With S = c/b (c = frame_bits / log2(1+snr)) the binding constraint
    delay(S) = T is a quadratic in S; the smaller root is the feasible one.
    """
    lam, t = rate, max_delay
    c = frame_bits / math.log2(1.0 + snr)
    s = ((1.0 + t * lam) - math.sqrt((1.0 + t * lam) ** 2 - 2.0 * lam * t)) / lam
    return c / s


# -- regression --------------------------------------------------------------

def lstsq_line_predict(times, values, at):
    """Least-squares line fit via numpy lstsq, evaluated at ``at``."""
    design = np.column_stack([np.ones(len(times)), np.asarray(times)])
    coef, *_ = np.linalg.lstsq(design, np.asarray(values), rcond=None)
    return coef[0] + coef[1] * at
