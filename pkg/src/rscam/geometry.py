"""Pose algebra on SO(3)/SE(3) and the ideal perspective camera.

Conventions used throughout the package:

- A pose (R, T) maps world points to camera coordinates, x_cam = R @ x_world + T.
  The camera viewpoint in world coordinates is V = -R.T @ T.
- A camera matrix is P = K @ [R | T] with K upper triangular (pixel units).
- Motion is a constant camera-frame linear velocity v (m/s) and angular
  velocity omega (rad/s) about the camera axes, so that
  R(t) = exp(hat(omega) * t) @ R(0) and T(t) = T(0) + v * t.

All functions are pure; values are plain numpy arrays and frozen dataclasses,
safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ROTATION_ATOL = 1e-10


def hat(omega) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector: hat(w) @ u == cross(w, u)."""
    wx, wy, wz = np.asarray(omega, dtype=float).reshape(3)
    return np.array([
        [0.0, -wz, wy],
        [wz, 0.0, -wx],
        [-wy, wx, 0.0],
    ])


def rotation_exp(omega, t: float = 1.0) -> np.ndarray:
    """Rodrigues exponential: the rotation reached after time t at rate omega."""
    w = np.asarray(omega, dtype=float).reshape(3) * float(t)
    theta = float(np.linalg.norm(w))
    if theta < 1e-12:
        # First-order term only; error is O(theta^2) < 1e-24 here.
        return np.eye(3) + hat(w)
    k = hat(w / theta)
    return np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * (k @ k)


def rotation_log(rotation) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (inverse of rotation_exp at t=1).

    Angles near pi are recovered from the symmetric part R + I, whose columns
    are parallel to the rotation axis, avoiding division by sin(theta) ~ 0.
    """
    r = np.asarray(rotation, dtype=float)
    check_rotation(r)
    trace = float(np.trace(r))
    cos_theta = min(1.0, max(-1.0, 0.5 * (trace - 1.0)))
    theta = math.acos(cos_theta)
    antisym = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if theta < 1e-8:
        return 0.5 * antisym
    if theta <= 0.75 * math.pi:
        return (theta / (2.0 * math.sin(theta))) * antisym
    # Large angles: the trace-based theta and 1/sin(theta) lose precision
    # toward pi.  The symmetric part gives the axis exactly,
    #   R + R^T + (1 - trace) I = 2 (1 - cos(theta)) axis axis^T,
    # and the antisymmetric norm 2 sin(theta) gives a well-conditioned angle.
    m = r + r.T + (1.0 - trace) * np.eye(3)
    col = int(np.argmax(np.linalg.norm(m, axis=0)))
    axis = m[:, col] / np.linalg.norm(m[:, col])
    sin_theta = 0.5 * float(np.linalg.norm(antisym))
    theta = math.pi - math.asin(min(1.0, sin_theta))
    # Keep the sign consistent with the antisymmetric part when it is nonzero.
    if sin_theta > 1e-12 and float(axis @ antisym) < 0.0:
        axis = -axis
    return axis * theta


def check_rotation(r: np.ndarray, atol: float = ROTATION_ATOL) -> None:
    """Raise ValueError unless r is orthogonal with determinant +1."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {r.shape}")
    if not np.allclose(r @ r.T, np.eye(3), atol=max(atol, 1e-9)):
        raise ValueError("matrix is not orthogonal")
    if abs(float(np.linalg.det(r)) - 1.0) > max(atol, 1e-9):
        raise ValueError("matrix determinant is not +1")


@dataclass(frozen=True)
class Pose:
    """Rigid transform world -> camera: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=float).reshape(3))
        check_rotation(self.rotation)
        if not np.all(np.isfinite(self.translation)):
            raise ValueError("translation must be finite")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def viewpoint(self) -> np.ndarray:
        """Camera center in world coordinates, V = -R.T @ T."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class CameraIntrinsics:
    """Calibration matrix plus sensor geometry.

    pixel_size is the normalized length of one pixel (1/focal-length-in-pixels
    for square pixels); width and height are the sensor size in pixels.
    """

    K: np.ndarray
    pixel_size: float
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float))
        if self.K.shape != (3, 3):
            raise ValueError("K must be 3x3")
        lower = self.K[np.tril_indices(3, k=-1)]
        if np.any(np.abs(lower) > 1e-12):
            raise ValueError("K must be upper triangular")
        if np.any(np.diag(self.K) <= 0):
            raise ValueError("K diagonal must be positive")
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    @staticmethod
    def normalized(width: int = 1, height: int = 1) -> "CameraIntrinsics":
        """Identity-K camera: image coordinates are already normalized."""
        return CameraIntrinsics(np.eye(3), 1.0, width, height)

    @staticmethod
    def from_fov(fov_x_deg: float, width: int, height: int) -> "CameraIntrinsics":
        """Square-pixel camera with the given horizontal field of view."""
        focal = 0.5 * width / math.tan(math.radians(fov_x_deg) / 2.0)
        k = np.array([
            [focal, 0.0, width / 2.0],
            [0.0, focal, height / 2.0],
            [0.0, 0.0, 1.0],
        ])
        return CameraIntrinsics(k, 1.0 / focal, width, height)

    @property
    def focal_y(self) -> float:
        return float(self.K[1, 1])

    @property
    def center_y(self) -> float:
        return float(self.K[1, 2])


@dataclass(frozen=True)
class MotionState:
    """Pose at t=0 plus constant camera-frame linear and angular velocities."""

    pose0: Pose = field(default_factory=Pose.identity)
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "linear_velocity",
                           np.asarray(self.linear_velocity, dtype=float).reshape(3))
        object.__setattr__(self, "angular_velocity",
                           np.asarray(self.angular_velocity, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.linear_velocity))
                and np.all(np.isfinite(self.angular_velocity))):
            raise ValueError("velocities must be finite")

    def pose_at(self, t: float, linearized: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """(R(t), T(t)); linearized replaces exp(hat(w) t) with I + t*hat(w)."""
        r0 = self.pose0.rotation
        if linearized:
            rt = (np.eye(3) + t * hat(self.angular_velocity)) @ r0
        else:
            rt = rotation_exp(self.angular_velocity, t) @ r0
        return rt, self.pose0.translation + self.linear_velocity * t


def camera_matrix_at(motion: MotionState, intrinsics: CameraIntrinsics,
                     t: float, linearized: bool = False) -> np.ndarray:
    """3x4 camera matrix K [R(t) | T(t)] of the moving camera at time t."""
    rt, tt = motion.pose_at(t, linearized=linearized)
    return intrinsics.K @ np.column_stack([rt, tt])


def project_perspective(point, camera_matrix: np.ndarray) -> np.ndarray:
    """Pin-hole projection (x/z, y/z) of a world point through a 3x4 matrix.

    Raises ValueError when the transformed depth is within 1e-12 of zero
    (point on the camera plane); negative depths are projected as-is so the
    map stays homogeneous in the camera matrix.
    """
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.shape[0] == 3:
        x = np.append(x, 1.0)
    p = np.asarray(camera_matrix, dtype=float) @ x
    if abs(p[2]) < 1e-12:
        raise ValueError("point projects to the camera plane (depth ~ 0)")
    return p[:2] / p[2]
