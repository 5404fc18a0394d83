"""Rolling-shutter projection: scan-time constraint, solvers, and closed forms.

A rolling-shutter sensor exposes one pixel row at a time.  For a frame whose
exposure starts at t0, the row being scanned at frame-local time t is

    v_cam(t0 + t) = r * t - v0        (pixel rows)

with r the signed scan rate (rows/second) and v0 the first-row offset.  A
static world point X is captured when the moving camera's projection crosses
the scanline, i.e. at the scan time t_c solving

    pi_y( P(t0 + t_c) X ) = r * t_c - v0

where P(t) = K [R(t) | T(t)].  Depending on the motion and on whether P(t) is
linearized in t, this constraint is linear, quadratic, or fully nonlinear in
t_c; `classify_case` picks the branch and `solve_scan_time` solves it.

For fronto-parallel motion (v_z = 0, omega about the optical axis only) the
constraint is linear and the captured image point has a closed form equal to
the pin-hole projection at frame start plus a correction term proportional to
the perspective optical flow.  When omega = 0 that closed form is exact; with
omega_z != 0 it is the first-order approximation of the true projection.

Scan rate and first-row offset live in pixel-row units; functions convert to
normalized (calibrated) units internally via the row focal length, so an
identity K makes all quantities normalized and unit-free.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeDepth, NoScanTime, Singularity
from .geometry import CameraIntrinsics, MotionState, hat, rotation_exp

DEPTH_EPS = 1e-12
SINGULARITY_EPS = 1e-12


@dataclass(frozen=True)
class ShutterParams:
    """Scanline timing of a rolling-shutter sensor.

    scan_rate is signed: positive scans top-to-bottom, negative bottom-to-top.
    row_exposure is carried for bookkeeping only; the geometric model treats
    within-row exposure as instantaneous.
    """

    scan_rate: float            # rows / second, nonzero
    first_row: float = 0.0      # row offset v0 (pixels)
    frame_delay: float = 0.0    # seconds between frames
    framerate: float = 30.0     # frames / second
    row_exposure: float = 0.0   # seconds, informational

    def __post_init__(self):
        if self.scan_rate == 0.0 or not math.isfinite(self.scan_rate):
            raise ValueError("scan_rate must be finite and nonzero")
        if self.framerate <= 0.0:
            raise ValueError("framerate must be positive")
        if self.frame_delay < 0.0 or self.row_exposure < 0.0:
            raise ValueError("frame_delay and row_exposure must be >= 0")

    @staticmethod
    def ideal(framerate: float, n_rows: int) -> "ShutterParams":
        """Zero-delay sensor whose scan spans the whole frame period."""
        return ShutterParams(scan_rate=n_rows * framerate, framerate=framerate)

    def scan_duration(self, n_rows: int) -> float:
        """Time to sweep n_rows rows (the frame window length)."""
        return n_rows / abs(self.scan_rate)

    def frame_start(self, frame_index: int) -> float:
        """Exposure start time of frame k, with any inter-frame delay added."""
        return frame_index * (1.0 / self.framerate + self.frame_delay)


def validate_frame_timing(shutter: ShutterParams, n_rows: int) -> None:
    """Raise ValueError when the scan of n_rows rows overruns the frame period."""
    if shutter.scan_duration(n_rows) > 1.0 / shutter.framerate + 1e-12:
        raise ValueError(
            f"scanning {n_rows} rows at {shutter.scan_rate} rows/s exceeds the "
            f"frame period of {1.0 / shutter.framerate} s"
        )


class ScanTimeCase(enum.Enum):
    """Structure of the scan-time constraint for a given motion."""

    FRONTO_PARALLEL_LINEAR = "fronto_parallel_linear"
    AXIAL_QUADRATIC = "axial_quadratic"
    GENERAL_QUADRATIC = "general_quadratic"
    EXACT_NONLINEAR = "exact_nonlinear"


@dataclass(frozen=True)
class RsProjection:
    """Result of projecting a point through the rolling-shutter model.

    pixel == perspective_part + correction, where perspective_part is the
    pin-hole projection at the frame's start time.  caught_twice flags a
    second in-window intersection of the point path and the scanline.
    """

    pixel: np.ndarray
    scan_time: float
    perspective_part: np.ndarray
    correction: np.ndarray
    caught_twice: bool = False


def normalized_scan(shutter: ShutterParams, intrinsics: CameraIntrinsics) -> tuple[float, float]:
    """(scan rate, first-row offset) in normalized image units.

    The pixel-row sweep v(t) = r t - v0 maps through the row of K to the
    normalized sweep w(t) = r_n t - v0_n with r_n = r / f_y and
    v0_n = (v0 + c_y) / f_y.
    """
    fy = intrinsics.focal_y
    return shutter.scan_rate / fy, (shutter.first_row + intrinsics.center_y) / fy


def classify_case(motion: MotionState, exact: bool = False) -> ScanTimeCase:
    """Pick the scan-time solution branch for a motion state.

    Fronto-parallel motion (v_z = 0, rotation only about the optical axis)
    gives a linear constraint; translation along the axis alone gives a
    quadratic; any other linearized motion is quadratic as well.  Passing
    exact=True requests the non-linearized model regardless of motion.
    """
    if exact:
        return ScanTimeCase.EXACT_NONLINEAR
    v = motion.linear_velocity
    w = motion.angular_velocity
    if v[2] == 0.0 and w[0] == 0.0 and w[1] == 0.0:
        return ScanTimeCase.FRONTO_PARALLEL_LINEAR
    if v[0] == 0.0 and v[1] == 0.0 and np.all(w == 0.0):
        return ScanTimeCase.AXIAL_QUADRATIC
    return ScanTimeCase.GENERAL_QUADRATIC


def _linear_motion(point, motion: MotionState) -> tuple[np.ndarray, np.ndarray]:
    """Camera-frame path p(tau) = Y + tau * W of a static point, linearized."""
    x = np.asarray(point, dtype=float).reshape(-1)[:3]
    pose = motion.pose0
    rx = pose.rotation @ x
    y = rx + pose.translation
    w = np.cross(motion.angular_velocity, rx) + motion.linear_velocity
    return y, w


def _exact_point(point, motion: MotionState, tau: float) -> np.ndarray:
    """Camera-frame position at absolute time tau under the exact model."""
    x = np.asarray(point, dtype=float).reshape(-1)[:3]
    rx = motion.pose0.rotation @ x
    return rotation_exp(motion.angular_velocity, tau) @ rx \
        + motion.pose0.translation + motion.linear_velocity * tau


def constraint_residual(point, motion: MotionState, intrinsics: CameraIntrinsics,
                        shutter: ShutterParams, t: float, linearized: bool = True,
                        frame_start: float = 0.0) -> float:
    """Scanline-crossing residual pi_y(P(t0 + t) X) - (r t - v0), in pixel rows.

    A root in t is a valid scan time for the frame starting at t0.
    """
    tau = frame_start + t
    if linearized:
        y, w = _linear_motion(point, motion)
        p = y + tau * w
    else:
        p = _exact_point(point, motion, tau)
    if p[2] <= DEPTH_EPS:
        raise NegativeDepth(f"point depth {p[2]:.3e} at t={t:.6e}")
    row = (intrinsics.focal_y * p[1] + intrinsics.center_y * p[2]) / p[2]
    return row - (shutter.scan_rate * t - shutter.first_row)


def _quadratic_coeffs(point, motion, intrinsics, shutter, frame_start):
    """Coefficients (a, b, c) of the scan-time constraint a t^2 + b t + c = 0."""
    y, w = _linear_motion(point, motion)
    fy, cy = intrinsics.focal_y, intrinsics.center_y
    r, v0, t0 = shutter.scan_rate, shutter.first_row, frame_start
    g = fy * w[1] + cy * w[2]
    l0 = fy * y[1] + cy * y[2]
    a = r * w[2]
    b = r * y[2] + (r * t0 - v0) * w[2] - g
    c = -(v0 * y[2] + v0 * t0 * w[2] + l0 + t0 * g)
    return a, b, c, y, w


def _in_window(t: float, t_max: float) -> bool:
    slack = 1e-12 * max(1.0, t_max)
    return -slack <= t <= t_max + slack


def _check_window_depth(y, w, t_max, t0):
    """Raise NegativeDepth when the point reaches the camera plane in-window."""
    depth_start = y[2] + t0 * w[2]
    depth_end = y[2] + (t0 + t_max) * w[2]
    if min(depth_start, depth_end) <= DEPTH_EPS:
        raise NegativeDepth("point crosses the camera plane inside the frame window")


def _solve_linear(a, b, c, y, w, t_max, t0, fy, singularity_eps, windowed=True):
    den_normalized = b / fy
    if abs(den_normalized) < singularity_eps:
        raise Singularity("point moves with the scanline (vanishing denominator)")
    t_c = -c / b
    if windowed:
        if not _in_window(t_c, t_max):
            _check_window_depth(y, w, t_max, t0)
            raise NoScanTime(f"scan time {t_c:.6e} outside frame window [0, {t_max:.6e}]")
        t_c = max(0.0, min(t_c, t_max))
    depth = y[2] + (t0 + t_c) * w[2]
    if depth <= DEPTH_EPS:
        raise NegativeDepth(f"depth {depth:.3e} at scan time")
    return t_c, False


def _solve_quadratic(a, b, c, y, w, t_max, t0, fy, singularity_eps):
    if a == 0.0:
        return _solve_linear(a, b, c, y, w, t_max, t0, fy, singularity_eps)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        _check_window_depth(y, w, t_max, t0)
        raise NoScanTime("scanline never meets the point (negative discriminant)")
    sq = math.sqrt(disc)
    # Cancellation-free quadratic roots.
    q = -0.5 * (b + math.copysign(sq, b if b != 0.0 else 1.0))
    roots = [q / a, c / q] if q != 0.0 else [0.0, 0.0]
    candidates = sorted(t for t in roots if _in_window(t, t_max))
    valid = [t for t in candidates if y[2] + (t0 + t) * w[2] > DEPTH_EPS]
    if not valid:
        if candidates:
            raise NegativeDepth("point is behind the camera at every in-window root")
        _check_window_depth(y, w, t_max, t0)
        raise NoScanTime(f"no root inside frame window [0, {t_max:.6e}]")
    second = len(valid) > 1 and abs(valid[1] - valid[0]) > 1e-12 * max(1.0, t_max)
    t_c = valid[0]
    return max(0.0, min(t_c, t_max)), second


def _solve_nonlinear(point, motion, intrinsics, shutter, t_max, frame_start,
                     n_samples: int = 129, max_bisect: int = 100):
    """Bracket the exact-model residual over the frame window and bisect."""

    def residual_or_none(t):
        p = _exact_point(point, motion, frame_start + t)
        if p[2] <= DEPTH_EPS:
            return None
        row = (intrinsics.focal_y * p[1] + intrinsics.center_y * p[2]) / p[2]
        return row - (shutter.scan_rate * t - shutter.first_row)

    ts = np.linspace(0.0, t_max, n_samples)
    values = [residual_or_none(t) for t in ts]
    saw_bad_depth = any(v is None for v in values)

    roots = []
    for i in range(n_samples - 1):
        f_lo, f_hi = values[i], values[i + 1]
        if f_lo is None or f_hi is None:
            continue
        if f_lo == 0.0:
            roots.append(float(ts[i]))
            continue
        if f_lo * f_hi > 0.0:
            continue
        lo, hi = float(ts[i]), float(ts[i + 1])
        depth_failed = False
        for _ in range(max_bisect):
            mid = 0.5 * (lo + hi)
            f_mid = residual_or_none(mid)
            if f_mid is None:
                saw_bad_depth = depth_failed = True
                break
            if f_mid == 0.0 or hi - lo < 1e-18 * max(1.0, t_max):
                lo = hi = mid
                break
            if f_lo * f_mid < 0.0:
                hi = mid
            else:
                lo, f_lo = mid, f_mid
        if not depth_failed:
            roots.append(0.5 * (lo + hi))
    if values[-1] == 0.0:
        roots.append(float(ts[-1]))

    roots = sorted(set(roots))
    if not roots:
        if saw_bad_depth:
            raise NegativeDepth("point crosses the camera plane inside the frame window")
        raise NoScanTime(f"no root inside frame window [0, {t_max:.6e}]")
    merged = [roots[0]]
    for t in roots[1:]:
        if t - merged[-1] > 1e-9 * max(1.0, t_max):
            merged.append(t)
    return merged[0], len(merged) > 1


def _solve(point, motion, intrinsics, shutter, case, frame_start, singularity_eps,
           windowed=True):
    t_max = shutter.scan_duration(intrinsics.height)
    if case is ScanTimeCase.EXACT_NONLINEAR:
        return _solve_nonlinear(point, motion, intrinsics, shutter, t_max, frame_start)
    a, b, c, y, w = _quadratic_coeffs(point, motion, intrinsics, shutter, frame_start)
    fy = intrinsics.focal_y
    if case is ScanTimeCase.FRONTO_PARALLEL_LINEAR:
        return _solve_linear(a, b, c, y, w, t_max, frame_start, fy, singularity_eps,
                             windowed=windowed)
    if not windowed:
        raise ValueError("unwindowed scan times are supported only for the "
                         "fronto-parallel closed form")
    return _solve_quadratic(a, b, c, y, w, t_max, frame_start, fy, singularity_eps)


def solve_scan_time(point, motion: MotionState, intrinsics: CameraIntrinsics,
                    shutter: ShutterParams, case: ScanTimeCase | None = None,
                    frame_start: float = 0.0,
                    singularity_eps: float = SINGULARITY_EPS) -> float:
    """Scan time of a world point inside the frame window [0, n_rows/|r|].

    The quadratic branches return the smallest in-window root.  Raises
    NoScanTime when the point is not imaged this frame, NegativeDepth when it
    sits at or behind the camera plane, and Singularity when it moves with
    the scanline.
    """
    if case is None:
        case = classify_case(motion)
    t_c, _ = _solve(point, motion, intrinsics, shutter, case, frame_start, singularity_eps)
    return t_c


def _project(p: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    if p[2] <= DEPTH_EPS:
        raise NegativeDepth(f"depth {p[2]:.3e} is not positive")
    q = intrinsics.K @ p
    return q[:2] / q[2]


def project_rolling_shutter(point, motion: MotionState, intrinsics: CameraIntrinsics,
                            shutter: ShutterParams, exact: bool = False,
                            frame_start: float = 0.0,
                            singularity_eps: float = SINGULARITY_EPS,
                            enforce_window: bool = True) -> RsProjection:
    """Image of a static world point in one frame of a rolling-shutter camera.

    Solves for the scan time, then evaluates the projection at that instant.
    Non-exact mode uses the linearized motion model, whose fronto-parallel
    branch reproduces the closed-form projection (exact whenever omega = 0);
    exact=True keeps the full rotation exponential and a bracketing root
    finder.  The result carries the pin-hole projection at frame start and
    the correction that the rolling shutter adds to it.

    enforce_window=False (closed form only) also returns scan times outside
    [0, n_rows/|r|]; the zero-offset row convention used by the optical-flow
    equations places row 0 at the principal point, so rows above it scan at
    negative times.
    """
    case = classify_case(motion, exact=exact)
    t_c, caught_twice = _solve(point, motion, intrinsics, shutter, case,
                               frame_start, singularity_eps,
                               windowed=enforce_window)
    if exact:
        p_capture = _exact_point(point, motion, frame_start + t_c)
        p_start = _exact_point(point, motion, frame_start)
    else:
        y, w = _linear_motion(point, motion)
        p_capture = y + (frame_start + t_c) * w
        p_start = y + frame_start * w
    pixel = _project(p_capture, intrinsics)
    reference = _project(p_start, intrinsics)
    return RsProjection(
        pixel=pixel,
        scan_time=t_c,
        perspective_part=reference,
        correction=pixel - reference,
        caught_twice=caught_twice,
    )


def invert_fronto_parallel(pixel, depth: float, motion: MotionState,
                           intrinsics: CameraIntrinsics, shutter: ShutterParams,
                           frame_start: float = 0.0) -> np.ndarray:
    """World point at the given depth whose rolling-shutter image is `pixel`.

    Under fronto-parallel motion the captured row alone fixes the scan time,
    t_c = (row + v0) / r, which makes the projection invertible up to the
    unknown depth.  Uses the linearized motion model; the scan time is not
    clipped to the frame window, so rows outside the sensor extrapolate.
    """
    v = motion.linear_velocity
    w = motion.angular_velocity
    if v[2] != 0.0 or w[0] != 0.0 or w[1] != 0.0:
        raise ValueError("inversion requires fronto-parallel motion")
    q = np.asarray(pixel, dtype=float).reshape(2)
    t_c = (q[1] + shutter.first_row) / shutter.scan_rate
    tau = frame_start + t_c
    ray = np.linalg.solve(intrinsics.K, np.array([q[0], q[1], 1.0]))
    p_capture = depth * ray / ray[2]
    pose = motion.pose0
    v_eff = v - np.cross(w, pose.translation)
    y = np.linalg.solve(np.eye(3) + tau * hat(w), p_capture - tau * v_eff)
    return pose.rotation.T @ (y - pose.translation)


def correction_magnitude(point, motion: MotionState, intrinsics: CameraIntrinsics,
                         shutter: ShutterParams, exact: bool = False) -> float:
    """Euclidean norm, in pixels, of the rolling-shutter correction term."""
    rs = project_rolling_shutter(point, motion, intrinsics, shutter, exact=exact)
    return float(np.linalg.norm(rs.correction))


def limit_line(shutter: ShutterParams, intrinsics: CameraIntrinsics,
               v_y: float) -> float:
    """Minimum safe depth z_min = v_y / (s_alpha * |r|) for row-speed v_y >= 0.

    Beyond z_min the image drifts by less than one pixel per scanned row and
    a pin-hole model is adequate; closer than z_min the rolling-shutter model
    should be used.
    """
    if v_y < 0.0:
        raise ValueError("v_y must be nonnegative")
    return v_y / (intrinsics.pixel_size * abs(shutter.scan_rate))


def drift_per_row(point, motion: MotionState, intrinsics: CameraIntrinsics,
                  shutter: ShutterParams) -> float:
    """Image drift, in pixels, accumulated while the shutter scans one row.

    This is |pixel optical flow| / |scan rate|; the safe region of
    `limit_line` is exactly where it stays below one pixel.
    """
    y, w = _linear_motion(point, motion)
    if y[2] <= DEPTH_EPS:
        raise NegativeDepth(f"depth {y[2]:.3e} is not positive")
    kp = intrinsics.K @ y
    kw = intrinsics.K @ w
    flow = (kw[:2] * kp[2] - kp[:2] * kw[2]) / (kp[2] * kp[2])
    return float(np.linalg.norm(flow)) / abs(shutter.scan_rate)
