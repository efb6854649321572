"""Synthetic IMU generation from motion sequences.

Resampling, virtual sensor attachment, finite-difference acceleration,
trailing-average smoothing, input scaling/masking, and the binary motion and
IMU dataset file formats.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import body, rotmath
from .combos import Location, LocationMask, enumerate_location_sets

# acceleration is divided by this before entering the network input vector
ACC_SCALE = 30.0
SMOOTH_WINDOW = 5
NUM_SLOTS = 5
INPUT_DIM = 60  # 5 slots x (3 accel + 9 orientation)

MOTION_MAGIC = b"SPMO"
MOTION_VERSION = 1
DATASET_MAGIC = b"SIMU"
DATASET_VERSION = 1


class EmptySequence(ValueError):
    pass


class TooShort(ValueError):
    """Sequence too short for finite-difference acceleration (< 3 frames)."""


@dataclass
class MotionSequence:
    """Timed ground-truth pose stream: root translation + 24 local rotations."""

    fps: float
    root_trans: np.ndarray        # (T, 3) meters
    local_quat: np.ndarray        # (T, 24, 4) unit quaternions (w, x, y, z)

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        self.root_trans = np.asarray(self.root_trans, dtype=np.float64)
        self.local_quat = np.asarray(self.local_quat, dtype=np.float64)
        if len(self.root_trans) != len(self.local_quat):
            raise ValueError("translation/rotation frame counts differ")

    def __len__(self) -> int:
        return len(self.root_trans)

    @property
    def duration(self) -> float:
        return len(self) / self.fps

    def local_rot_matrices(self) -> np.ndarray:
        return rotmath.quat_to_matrix(self.local_quat)   # (T, 24, 3, 3)


@dataclass(frozen=True)
class VirtualSensor:
    location: Location
    joint: int
    local_offset: tuple = (0.0, 0.0, 0.0)


# canonical location -> joint attachments; pockets sit on the upper legs
CANONICAL_SENSORS = (
    VirtualSensor(Location.LEFT_WRIST, 20, (0.03, 0.0, 0.02)),
    VirtualSensor(Location.RIGHT_WRIST, 21, (-0.03, 0.0, 0.02)),
    VirtualSensor(Location.LEFT_POCKET, 1, (0.08, -0.12, 0.10)),
    VirtualSensor(Location.RIGHT_POCKET, 2, (-0.08, -0.12, 0.10)),
    VirtualSensor(Location.HEAD, 15, (0.0, 0.07, 0.05)),
)

_CANONICAL_JOINTS = {s.location: s.joint for s in CANONICAL_SENSORS}


def validate_sensors(sensors) -> list[VirtualSensor]:
    sensors = list(sensors)
    if sorted(s.location for s in sensors) != list(Location):
        raise ValueError("need exactly one sensor per canonical location")
    for s in sensors:
        if s.joint != _CANONICAL_JOINTS[s.location]:
            raise ValueError(f"{s.location.name} must attach to joint "
                             f"{_CANONICAL_JOINTS[s.location]}")
    return sorted(sensors, key=lambda s: int(s.location))


@dataclass
class ImuFrame:
    """Per-tick readings for the five slots; absent slots are exact zeros."""

    timestamp: float
    present: np.ndarray           # (5,) bool
    accel: np.ndarray             # (5, 3) m/s^2, global frame
    orient: np.ndarray            # (5, 3, 3) global frame

    def __post_init__(self):
        self.present = np.asarray(self.present, dtype=bool)
        self.accel = np.asarray(self.accel, dtype=np.float64)
        self.orient = np.asarray(self.orient, dtype=np.float64)
        absent = ~self.present
        self.accel[absent] = 0.0
        self.orient[absent] = 0.0


def resample(seq: MotionSequence, target_fps: float) -> MotionSequence:
    """Resample to target_fps: slerp for rotations, lerp for translation."""
    if target_fps <= 0:
        raise ValueError("target_fps must be positive")
    n = len(seq)
    if n == 0:
        raise EmptySequence("cannot resample an empty sequence")
    count = int(round(seq.duration * target_fps))
    count = max(count, 1)
    src_t = np.arange(count) * (seq.fps / target_fps)
    i0 = np.clip(np.floor(src_t).astype(int), 0, n - 1)
    i1 = np.clip(i0 + 1, 0, n - 1)
    frac = np.clip(src_t - i0, 0.0, 1.0)

    trans = seq.root_trans[i0] * (1 - frac)[:, None] + seq.root_trans[i1] * frac[:, None]
    quat = rotmath.slerp(seq.local_quat[i0], seq.local_quat[i1], frac[:, None])
    return MotionSequence(target_fps, trans, quat)


def sensor_world_positions(seq: MotionSequence, sensors, skel: body.Skeleton) -> np.ndarray:
    """World positions of the five virtual sensors over time. (T, 5, 3)"""
    sensors = validate_sensors(sensors)
    local_rot = seq.local_rot_matrices()
    G, P = body.fk_batched(local_rot, skel)
    out = np.empty((len(seq), NUM_SLOTS, 3))
    for s in sensors:
        j = s.joint
        out[:, int(s.location)] = (P[:, j] + seq.root_trans
                                   + np.einsum("tab,b->ta", G[:, j], np.asarray(s.local_offset)))
    return out


def synthesize_imu(seq: MotionSequence, sensors=CANONICAL_SENSORS,
                   skel: body.Skeleton | None = None) -> list[ImuFrame]:
    """Synthesize all-slots-present IMU frames from a motion sequence.

    Acceleration is the central second difference of the sensor world position
    (edge frames copy their neighbor); orientation is the FK global rotation of
    the carrying joint. No gravity term is added.
    """
    skel = skel or body.default_skeleton()
    sensors = validate_sensors(sensors)
    T = len(seq)
    if T < 3:
        raise TooShort("acceleration synthesis needs at least 3 frames")

    local_rot = seq.local_rot_matrices()
    G, _ = body.fk_batched(local_rot, skel)
    pos = sensor_world_positions(seq, sensors, skel)

    accel = np.empty_like(pos)
    accel[1:-1] = (pos[2:] - 2.0 * pos[1:-1] + pos[:-2]) * seq.fps ** 2
    accel[0] = accel[1]
    accel[-1] = accel[-2]

    joints = [s.joint for s in sensors]
    orient = G[:, joints]   # sensors already sorted by slot

    frames = []
    present = np.ones(NUM_SLOTS, dtype=bool)
    for t in range(T):
        frames.append(ImuFrame(t / seq.fps, present.copy(), accel[t].copy(), orient[t].copy()))
    return frames


def smooth_channels(x: np.ndarray, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Trailing moving average along axis 0, shrinking at the start."""
    if window <= 0 or window % 2 == 0:
        raise ValueError("window must be odd and positive")
    x = np.asarray(x, dtype=np.float64)
    c = np.cumsum(x, axis=0)
    out = np.empty_like(x)
    w = min(window, len(x))
    for t in range(min(w, len(x))):
        out[t] = c[t] / (t + 1)
    if len(x) > window:
        out[window:] = (c[window:] - c[:-window]) / window
    return out


def smooth(frames: list[ImuFrame], window: int = SMOOTH_WINDOW) -> list[ImuFrame]:
    """Per-channel trailing average of acceleration and orientation channels."""
    if not frames:
        return []
    accel = smooth_channels(np.stack([f.accel for f in frames]), window)
    orient = smooth_channels(np.stack([f.orient for f in frames]), window)
    return [ImuFrame(f.timestamp, f.present.copy(), accel[t], orient[t])
            for t, f in enumerate(frames)]


class StreamingSmoother:
    """Causal counterpart of smooth(); one instance per live stream."""

    def __init__(self, window: int = SMOOTH_WINDOW):
        if window <= 0 or window % 2 == 0:
            raise ValueError("window must be odd and positive")
        self.window = window
        self._hist: list[ImuFrame] = []

    def push(self, frame: ImuFrame) -> ImuFrame:
        self._hist.append(frame)
        if len(self._hist) > self.window:
            self._hist.pop(0)
        accel = np.mean([f.accel for f in self._hist], axis=0)
        orient = np.mean([f.orient for f in self._hist], axis=0)
        return ImuFrame(frame.timestamp, frame.present.copy(), accel, orient)


def scale_and_flatten(frame: ImuFrame, mask: LocationMask) -> np.ndarray:
    """Build the 60-dim model input: per slot accel/30 then row-major orientation.

    Slots outside the mask are zeroed.
    """
    out = np.zeros(INPUT_DIM)
    for loc in Location:
        if loc not in mask or not frame.present[int(loc)]:
            continue
        base = int(loc) * 12
        out[base:base + 3] = frame.accel[int(loc)] / ACC_SCALE
        out[base + 3:base + 12] = frame.orient[int(loc)].reshape(9)
    return out


def frames_to_inputs(frames: list[ImuFrame], mask: LocationMask) -> np.ndarray:
    """scale_and_flatten over a whole stream. (T, 60)"""
    return np.stack([scale_and_flatten(f, mask) for f in frames]) if frames else \
        np.zeros((0, INPUT_DIM))


def apply_mask(frames: list[ImuFrame], mask: LocationMask) -> list[ImuFrame]:
    """Copy of the stream with slots outside the mask zeroed out."""
    keep = np.array([loc in mask for loc in Location])
    return [ImuFrame(f.timestamp, f.present & keep, f.accel.copy(), f.orient.copy())
            for f in frames]


def expand_combinations(frames: list[ImuFrame]) -> list[tuple[LocationMask, list[ImuFrame]]]:
    """One masked copy of the stream per canonical location combination (24)."""
    return [(mask, apply_mask(frames, mask)) for mask in enumerate_location_sets()]


# ---------------------------------------------------------------------------
# file formats (little-endian, f32 at the boundary)

def save_motion(path, seq: MotionSequence) -> None:
    with open(path, "wb") as f:
        f.write(MOTION_MAGIC)
        f.write(struct.pack("<HfI", MOTION_VERSION, seq.fps, len(seq)))
        for t in range(len(seq)):
            f.write(np.asarray(seq.root_trans[t], dtype="<f4").tobytes())
            f.write(np.asarray(seq.local_quat[t], dtype="<f4").tobytes())


def load_motion(path) -> MotionSequence:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MOTION_MAGIC:
            raise ValueError("not a motion file")
        version, fps, count = struct.unpack("<HfI", f.read(10))
        if version != MOTION_VERSION:
            raise ValueError(f"unsupported motion file version {version}")
        frame_bytes = (3 + 24 * 4) * 4
        raw = f.read(count * frame_bytes)
        if len(raw) != count * frame_bytes:
            raise ValueError("truncated motion file")
    data = np.frombuffer(raw, dtype="<f4").reshape(count, 3 + 96).astype(np.float64)
    trans = data[:, :3]
    quat = data[:, 3:].reshape(count, 24, 4)
    quat = quat / np.linalg.norm(quat, axis=-1, keepdims=True)
    return MotionSequence(float(fps), trans, quat)


@dataclass
class ImuDataset:
    """A concatenation of masked IMU streams, optionally with paired poses.

    Stream boundaries are implicit: a new stream starts where the mask id
    changes or the timestamp resets.
    """

    fps: float
    frames: list = field(default_factory=list)          # ImuFrame
    mask_ids: np.ndarray = None                         # (T,) uint8
    poses: np.ndarray | None = None                     # (T, 24, 4) quats or None

    def __post_init__(self):
        self.mask_ids = np.asarray(self.mask_ids if self.mask_ids is not None else [],
                                   dtype=np.uint8)

    def __len__(self):
        return len(self.frames)

    def streams(self) -> list[tuple[LocationMask, slice]]:
        """(mask, frame range) per contiguous stream."""
        out = []
        if not self.frames:
            return out
        start = 0
        for t in range(1, len(self.frames)):
            if (self.mask_ids[t] != self.mask_ids[t - 1]
                    or self.frames[t].timestamp < self.frames[t - 1].timestamp):
                out.append((LocationMask(int(self.mask_ids[start])), slice(start, t)))
                start = t
        out.append((LocationMask(int(self.mask_ids[start])), slice(start, len(self.frames))))
        return out


def save_dataset(path, ds: ImuDataset) -> None:
    has_pose = ds.poses is not None
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<HBfI", DATASET_VERSION, int(has_pose), ds.fps, len(ds)))
        for t, frame in enumerate(ds.frames):
            f.write(struct.pack("<d", frame.timestamp))
            for s in range(NUM_SLOTS):
                f.write(struct.pack("<B", int(frame.present[s])))
                f.write(np.asarray(frame.accel[s], dtype="<f4").tobytes())
                f.write(np.asarray(frame.orient[s], dtype="<f4").tobytes())
            f.write(struct.pack("<B", int(ds.mask_ids[t])))
            if has_pose:
                f.write(np.asarray(ds.poses[t], dtype="<f4").tobytes())


def load_dataset(path) -> ImuDataset:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != DATASET_MAGIC:
            raise ValueError("not an IMU dataset file")
        version, has_pose, fps, count = struct.unpack("<HBfI", f.read(11))
        if version != DATASET_VERSION:
            raise ValueError(f"unsupported dataset version {version}")
        frames, mask_ids = [], np.empty(count, dtype=np.uint8)
        poses = np.empty((count, 24, 4)) if has_pose else None
        slot_bytes = 1 + 12 + 36
        for t in range(count):
            (ts,) = struct.unpack("<d", f.read(8))
            present = np.empty(NUM_SLOTS, dtype=bool)
            accel = np.empty((NUM_SLOTS, 3))
            orient = np.empty((NUM_SLOTS, 3, 3))
            for s in range(NUM_SLOTS):
                raw = f.read(slot_bytes)
                present[s] = bool(raw[0])
                vals = np.frombuffer(raw[1:], dtype="<f4").astype(np.float64)
                accel[s] = vals[:3]
                orient[s] = vals[3:].reshape(3, 3)
            frames.append(ImuFrame(ts, present, accel, orient))
            (mask_ids[t],) = struct.unpack("<B", f.read(1))
            if has_pose:
                q = np.frombuffer(f.read(24 * 4 * 4), dtype="<f4").astype(np.float64)
                poses[t] = q.reshape(24, 4)
    if poses is not None:
        poses = poses / np.linalg.norm(poses, axis=-1, keepdims=True)
    return ImuDataset(float(fps), frames, mask_ids, poses)


def build_dataset(seq: MotionSequence, masks=None, skel: body.Skeleton | None = None,
                  smooth_window: int = SMOOTH_WINDOW, include_pose: bool = True) -> ImuDataset:
    """Synthesize, smooth, and mask a motion sequence into a training dataset."""
    skel = skel or body.default_skeleton()
    frames = synthesize_imu(seq, CANONICAL_SENSORS, skel)
    if smooth_window > 1:
        frames = smooth(frames, smooth_window)
    if masks is None:
        expanded = expand_combinations(frames)
    else:
        expanded = [(m, apply_mask(frames, m)) for m in masks]
    all_frames, mask_ids, poses = [], [], []
    for mask, stream in expanded:
        all_frames.extend(stream)
        mask_ids.extend([mask.bits] * len(stream))
        if include_pose:
            poses.append(seq.local_quat)
    return ImuDataset(seq.fps, all_frames, np.asarray(mask_ids, dtype=np.uint8),
                      np.concatenate(poses) if include_pose else None)
