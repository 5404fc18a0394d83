"""Crossed-slit structure of a translating rolling-shutter camera.

A pin-hole camera's back-projected rays all pass through one point.  A
rolling-shutter camera translating parallel to its image plane instead sends
every back-projected ray through two fixed 3-D lines (slits): one through the
origin along the translation direction, and one horizontal line at depth
v_y / r.  Adding rotation about the optical axis destroys this structure.

This module works in the calibrated convention: image points are normalized
coordinates (identity K) and the ShutterParams scan rate and first-row offset
are in the same normalized row units (convert pixel-unit parameters with
`shutter.normalized_scan` first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSlits
from .geometry import CameraIntrinsics, MotionState
from .shutter import ShutterParams, invert_fronto_parallel


@dataclass(frozen=True)
class Line3D:
    """3-D line through `point` with unit `direction`."""

    point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(3))
        d = np.asarray(self.direction, dtype=float).reshape(3)
        norm = np.linalg.norm(d)
        if norm < 1e-300:
            raise ValueError("line direction must be nonzero")
        object.__setattr__(self, "direction", d / norm)

    def at(self, s: float) -> np.ndarray:
        return self.point + s * self.direction


@dataclass(frozen=True)
class SlitPair:
    slit1: Line3D
    slit2: Line3D


def compute_slits(motion: MotionState, shutter: ShutterParams) -> SlitPair:
    """The two slits of a camera translating with v = (v_x, v_y, 0).

    slit1 passes through the origin along the translation direction; slit2 is
    the horizontal line at height -v0 * v_y / r in the plane z = v_y / r.  The
    slits coincide as the velocity shrinks to zero, and the construction is
    undefined (DegenerateSlits) for a stationary camera, which is a pin-hole.
    """
    v = motion.linear_velocity
    w = motion.angular_velocity
    if v[2] != 0.0 or np.any(w != 0.0):
        raise ValueError("slits exist only for translation parallel to the image plane")
    if v[0] == 0.0 and v[1] == 0.0:
        raise DegenerateSlits("stationary camera: both slits collapse to the origin")
    r = shutter.scan_rate
    v0 = shutter.first_row
    slit1 = Line3D(np.zeros(3), np.array([v[0], v[1], 0.0]))
    slit2 = Line3D(np.array([0.0, -v0 * v[1] / r, v[1] / r]), np.array([1.0, 0.0, 0.0]))
    return SlitPair(slit1=slit1, slit2=slit2)


def backproject(q, motion: MotionState, shutter: ShutterParams,
                depths: tuple[float, float, float] = (1.0, 2.0, 3.0)) -> Line3D:
    """Inverse image of a normalized image point as a 3-D line.

    Solves the projection for the world point at two sample depths, fits the
    line through them, and verifies collinearity at a third depth.  Valid for
    fronto-parallel motion; with a stationary camera this is the pin-hole ray
    through (u, v, 1).
    """
    intrinsics = CameraIntrinsics.normalized()
    z1, z2, z3 = depths
    p1 = invert_fronto_parallel(q, z1, motion, intrinsics, shutter)
    p2 = invert_fronto_parallel(q, z2, motion, intrinsics, shutter)
    p3 = invert_fronto_parallel(q, z3, motion, intrinsics, shutter)
    line = Line3D(p1, p2 - p1)
    off_line = p3 - line.point
    residual = np.linalg.norm(off_line - (off_line @ line.direction) * line.direction)
    scale = max(1.0, float(np.linalg.norm(p3)))
    if residual > 1e-9 * scale:
        raise ValueError(f"inverse image is not a straight line (residual {residual:.3e})")
    return line


def line_line_distance(a: Line3D, b: Line3D) -> float:
    """Minimal Euclidean distance between two 3-D lines (0 when they meet)."""
    cross = np.cross(a.direction, b.direction)
    offset = b.point - a.point
    norm = np.linalg.norm(cross)
    if norm < 1e-12:
        # Parallel (or identical): perpendicular distance of the offset.
        return float(np.linalg.norm(offset - (offset @ a.direction) * a.direction))
    return float(abs(offset @ cross) / norm)
