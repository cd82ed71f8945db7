"""Small planar/rotation helpers shared by marker generation and perception."""
from __future__ import annotations

import math

import numpy as np

Point = tuple[float, float]


def polygon_area(vertices) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    v = np.asarray(vertices, dtype=np.float64)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def is_convex(vertices, tol: float = 1e-12) -> bool:
    """True for a simple convex polygon (collinear runs allowed)."""
    v = np.asarray(vertices, dtype=np.float64)
    n = len(v)
    if n < 3:
        return False
    e = np.roll(v, -1, axis=0) - v
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    if not (np.all(cross >= -tol) or np.all(cross <= tol)):
        return False
    # winding once: edge directions turn through exactly one full circle
    ang = np.arctan2(e[:, 1], e[:, 0])
    turn = np.diff(np.append(ang, ang[0]))
    turn = (turn + np.pi) % (2 * np.pi) - np.pi
    return abs(abs(turn.sum()) - 2 * np.pi) < 1e-6


def _cut(a: Point, b: Point, axis: int, value: float) -> Point:
    # canonical endpoint order so neighbouring cells produce bit-identical vertices
    if (b[0], b[1]) < (a[0], a[1]):
        a, b = b, a
    t = (value - a[axis]) / (b[axis] - a[axis])
    other = 1 - axis
    p = [0.0, 0.0]
    p[axis] = value
    p[other] = a[other] + t * (b[other] - a[other])
    return (p[0], p[1])


def clip_polygon_to_rect(vertices, rect) -> list[Point]:
    """Sutherland-Hodgman clip of a convex polygon to ``rect=(x0, y0, x1, y1)``."""
    x0, y0, x1, y1 = rect
    planes = ((0, x0, 1), (0, x1, -1), (1, y0, 1), (1, y1, -1))
    out = [tuple(map(float, p)) for p in vertices]
    for axis, value, sign in planes:
        if not out:
            break
        src, out = out, []
        for k in range(len(src)):
            cur = src[k]
            prev = src[k - 1]
            cur_in = sign * (cur[axis] - value) >= 0
            prev_in = sign * (prev[axis] - value) >= 0
            if cur_in:
                if not prev_in:
                    out.append(_cut(prev, cur, axis, value))
                out.append(cur)
            elif prev_in:
                out.append(_cut(prev, cur, axis, value))
    dedup: list[Point] = []
    for p in out:
        if not dedup or p != dedup[-1]:
            dedup.append(p)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return dedup


def rotation_from_ypr(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def ypr_from_rotation(r: np.ndarray) -> tuple[float, float, float]:
    pitch = math.asin(max(-1.0, min(1.0, -float(r[2, 0]))))
    yaw = math.atan2(float(r[1, 0]), float(r[0, 0]))
    roll = math.atan2(float(r[2, 1]), float(r[2, 2]))
    return yaw, pitch, roll


def closest_rotation(m: np.ndarray) -> np.ndarray:
    """Orthogonal polar factor of ``m`` with det +1."""
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt)) or 1.0
    return u @ np.diag([1.0, 1.0, d]) @ vt


def rotation_angle(r: np.ndarray) -> float:
    """Angle (rad) of the rotation ``r``."""
    c = (np.trace(r) - 1.0) / 2.0
    return math.acos(max(-1.0, min(1.0, c)))
