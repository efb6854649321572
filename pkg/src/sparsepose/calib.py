"""Device-to-global frame alignment and T-pose bone offsets.

A device reports its orientation in its own native reference frame. A static
capture with the device held in the chosen global frame yields R_align; a
T-pose capture (bone rotations identity by definition) yields R_off, the
mounting rotation between device and bone. Raw acceleration is assumed
gravity-free in the device frame (consumer user-acceleration convention).
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import rotmath
from .combos import Location

MIN_SAMPLES = 75          # 3 s at 25 fps
MAX_SPREAD_DEG = 15.0

PROFILE_MAGIC = b"SPCP"
PROFILE_VERSION = 1


class InsufficientSamples(ValueError):
    pass


class InconsistentReadings(ValueError):
    """A calibration sample strayed too far from the window mean."""


@dataclass(frozen=True)
class LocationCalibration:
    r_align: np.ndarray       # device native reference -> common global frame
    r_off: np.ndarray         # device frame -> bone frame, from the T-pose


@dataclass
class CalibrationProfile:
    entries: dict = field(default_factory=dict)   # Location -> LocationCalibration

    @classmethod
    def identity(cls) -> "CalibrationProfile":
        eye = np.eye(3)
        return cls({loc: LocationCalibration(eye.copy(), eye.copy()) for loc in Location})


def mean_rotation(readings: np.ndarray) -> np.ndarray:
    """Chordal mean: average the matrices, project back onto SO(3)."""
    readings = np.asarray(readings, dtype=np.float64)
    return rotmath.nearest_rotation(readings.mean(axis=0))


def _check_window(readings: np.ndarray) -> np.ndarray:
    readings = np.asarray(readings, dtype=np.float64)
    if readings.ndim != 3 or readings.shape[1:] != (3, 3):
        raise ValueError("readings must be (N, 3, 3)")
    if len(readings) < MIN_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_SAMPLES} samples, got {len(readings)}")
    mean = mean_rotation(readings)
    dev = rotmath.geodesic_angle_deg(readings, mean)
    if np.any(dev > MAX_SPREAD_DEG):
        raise InconsistentReadings(
            f"sample deviates {dev.max():.1f} deg from the window mean")
    return mean


def build_alignment(readings: np.ndarray) -> np.ndarray:
    """Mean orientation over a >= 3 s static window in the common frame."""
    return _check_window(readings)


def build_tpose_offset(r_align: np.ndarray, tpose_readings: np.ndarray) -> np.ndarray:
    """Mounting rotation such that the calibrated T-pose bone is identity."""
    mean = _check_window(tpose_readings)
    return np.linalg.inv(r_align.T @ mean)


def apply_calibration(cal: LocationCalibration, raw_orient: np.ndarray,
                      raw_accel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Calibrated bone orientation and global-frame acceleration."""
    device_in_global = cal.r_align.T @ raw_orient
    bone_orient = device_in_global @ cal.r_off
    global_accel = device_in_global @ np.asarray(raw_accel, dtype=np.float64)
    return bone_orient, global_accel


def save_profile(path, profile: CalibrationProfile) -> None:
    with open(path, "wb") as f:
        f.write(PROFILE_MAGIC)
        f.write(struct.pack("<HB", PROFILE_VERSION, len(profile.entries)))
        for loc, cal in sorted(profile.entries.items()):
            f.write(struct.pack("<B", int(loc)))
            f.write(np.asarray(cal.r_align, dtype="<f4").tobytes())
            f.write(np.asarray(cal.r_off, dtype="<f4").tobytes())


def load_profile(path) -> CalibrationProfile:
    with open(path, "rb") as f:
        if f.read(4) != PROFILE_MAGIC:
            raise ValueError("not a calibration profile")
        version, count = struct.unpack("<HB", f.read(3))
        if version != PROFILE_VERSION:
            raise ValueError(f"unsupported profile version {version}")
        entries = {}
        for _ in range(count):
            (loc,) = struct.unpack("<B", f.read(1))
            r_align = np.frombuffer(f.read(36), dtype="<f4").astype(np.float64).reshape(3, 3)
            r_off = np.frombuffer(f.read(36), dtype="<f4").astype(np.float64).reshape(3, 3)
            entries[Location(loc)] = LocationCalibration(r_align, r_off)
    return CalibrationProfile(entries)
