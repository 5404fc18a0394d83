"""Scan-rate calibration from a flashing LED, simulated end to end.

A lensless sensor watching an LED that flashes at a known frequency records
horizontal bands whose spatial period encodes the scan rate: the shutter
sweeps r rows per second, so one LED cycle spans r / led_hz rows.  Stacking
the per-frame row intensities gives a spatio-temporal image I(y, t); the
dominant spatial frequency of its 2-D Fourier transform, marginalized over
the temporal axis, yields the rate estimate.

The LED is modeled as a square wave (the stripe image is not a sinusoid, so
the spectrum carries harmonics; the estimator keeps the lowest significant
peak).  An optional intensity gradient mimics uneven exposure across the
sensor.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NoPeak
from .shutter import ShutterParams


@dataclass(frozen=True)
class SpatioTemporalImage:
    """Stack of per-frame row intensities: values[y, k] for frame k."""

    values: np.ndarray
    framerate: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("values must be a nonempty 2-D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("intensities must be finite")
        object.__setattr__(self, "values", v)

    @property
    def row_count(self) -> int:
        return self.values.shape[0]

    @property
    def frame_count(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CalibrationEstimate:
    """Estimated seconds per scanned row with a one-bin uncertainty."""

    scan_seconds_per_row: float
    uncertainty: float
    led_frequency: float

    @property
    def scan_rate(self) -> float:
        return 1.0 / self.scan_seconds_per_row


def _led_on(t: np.ndarray, led_hz: float, duty: float) -> np.ndarray:
    return (np.mod(t * led_hz, 1.0) < duty).astype(float)


def _row_times(shutter: ShutterParams, n_rows: int, n_frames: int) -> np.ndarray:
    """Absolute exposure time of row y in frame k, shape (n_rows, n_frames)."""
    rows = np.arange(n_rows, dtype=float)
    frames = np.arange(n_frames, dtype=float)
    start = frames * (1.0 / shutter.framerate + shutter.frame_delay)
    offset = (rows + shutter.first_row) / shutter.scan_rate
    return offset[:, None] + start[None, :]


def synthesize_led_image(shutter: ShutterParams, n_rows: int, n_frames: int,
                         led_hz: float, duty: float = 0.5,
                         exposure_gradient: bool = False) -> SpatioTemporalImage:
    """Spatio-temporal image of an LED flashing at led_hz with the given duty.

    Row y of frame k is bright iff the LED is on at that row's exposure time.
    With exposure_gradient a linear intensity falloff is applied along the
    row axis.
    """
    if led_hz <= 0.0:
        raise ValueError("led_hz must be positive")
    if not 0.0 < duty < 1.0:
        raise ValueError("duty must lie in (0, 1)")
    times = _row_times(shutter, n_rows, n_frames)
    values = _led_on(times, led_hz, duty)
    if exposure_gradient:
        gradient = np.linspace(1.0, 0.4, n_rows)
        values = values * gradient[:, None]
    return SpatioTemporalImage(values=values, framerate=shutter.framerate)


def synthesize_led_frames(shutter: ShutterParams, n_rows: int, n_cols: int,
                          n_frames: int, led_hz: float, duty: float = 0.5,
                          exposure_gradient: bool = False) -> np.ndarray:
    """Full frame stack (n_frames, n_rows, n_cols) of the LED capture.

    Every pixel of a row shares the row's exposure time; the optional
    gradient falls off along the scanline (column) direction.
    """
    base = synthesize_led_image(shutter, n_rows, n_frames, led_hz, duty).values
    frames = np.repeat(base.T[:, :, None], n_cols, axis=2)
    if exposure_gradient:
        frames = frames * np.linspace(1.0, 0.4, n_cols)[None, None, :]
    return frames


def sum_columns(frames: np.ndarray, col_start: int = 0,
                col_stop: int | None = None, framerate: float = 30.0) -> SpatioTemporalImage:
    """Marginalize a frame stack over a column range into I(y, t)."""
    sub = frames[:, :, col_start:col_stop]
    values = sub.sum(axis=2).T
    peak = values.max()
    if peak > 0:
        values = values / peak
    return SpatioTemporalImage(values=values, framerate=framerate)


def marginalized_spectrum(image: SpatioTemporalImage) -> tuple[np.ndarray, np.ndarray]:
    """Positive spatial frequencies (cycles/row) and their marginal magnitude.

    Applies a Hann window along the row axis, takes the 2-D transform, sums
    magnitudes over the temporal frequency axis, and zeroes the DC bin.
    """
    values = image.values
    n_rows = values.shape[0]
    # Remove each column's mean before windowing, otherwise the window
    # smears the DC pedestal into the lowest bins.
    centered = values - values.mean(axis=0, keepdims=True)
    window = np.hanning(n_rows)
    spectrum = np.fft.fft2(centered * window[:, None])
    marginal = np.abs(spectrum).sum(axis=1)
    marginal[0] = 0.0
    n_pos = n_rows // 2
    freqs = np.arange(1, n_pos + 1) / n_rows
    return freqs, marginal[1:n_pos + 1]


def estimate_scan_rate(image: SpatioTemporalImage, led_hz: float) -> CalibrationEstimate:
    """Scan rate from the stripe frequency of a spatio-temporal LED image.

    The fundamental stripe frequency nu (cycles/row) satisfies
    r = led_hz / nu.  Harmonics of the square-wave stripes are rejected by
    taking the lowest-frequency significant spectral peak; NoPeak is raised
    when nothing rises above three times the median magnitude.
    """
    if led_hz <= 0.0:
        raise ValueError("led_hz must be positive")
    freqs, magnitude = marginalized_spectrum(image)
    floor = 3.0 * float(np.median(magnitude))
    significant = magnitude > max(floor, 0.0)
    if not np.any(significant):
        raise NoPeak("no spectral peak above 3x the median magnitude")
    # The fundamental of a square-wave stripe pattern is at least as strong
    # as every harmonic, so the global maximum is (up to leakage) either the
    # fundamental or a near-tie with it.  Among local maxima above the noise
    # floor, take the lowest-frequency one commensurate with the global peak;
    # weaker low-frequency bumps are leakage skirts, not the fundamental.
    global_max = float(magnitude.max())
    padded = np.concatenate([[0.0], magnitude, [0.0]])
    local_max = (magnitude >= padded[:-2]) & (magnitude >= padded[2:])
    candidates = np.flatnonzero(significant & local_max
                                & (magnitude >= 0.8 * global_max))
    if candidates.size == 0:
        raise NoPeak("significant bins exist but none form a dominant peak")
    peak_bin = int(candidates[0])
    nu = float(freqs[peak_bin])
    n_rows = image.row_count
    return CalibrationEstimate(
        scan_seconds_per_row=nu / led_hz,
        uncertainty=0.5 / (n_rows * led_hz),
        led_frequency=led_hz,
    )


def ideal_seconds_per_row(framerate: float, n_rows: int) -> float:
    """Row period of a zero-delay sensor whose scan fills the frame period."""
    if framerate <= 0.0 or n_rows <= 0:
        raise ValueError("framerate and n_rows must be positive")
    return 1.0 / (framerate * n_rows)


def write_matrix_csv(path, values: np.ndarray, header_lines: list[str] | None = None) -> None:
    """Plain-text matrix: one image row per line, comma separated."""
    lines = [f"# {line}" for line in (header_lines or [])]
    for row in np.asarray(values, dtype=float):
        lines.append(",".join(f"{x:.10g}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append([float(x) for x in line.split(",")])
    return np.array(rows, dtype=float)


def write_pgm(path, values: np.ndarray, comment: str = "") -> None:
    """8-bit binary PGM of intensities in [0, 1]."""
    arr = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    h, w = data.shape
    header = f"P5\n# {comment}\n{w} {h}\n255\n" if comment else f"P5\n{w} {h}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("only binary (P5) PGM files are supported")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pos += 1
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width).astype(float) / float(maxval)
