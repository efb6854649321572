"""Binary wire protocol, simulated device replay, and the 25 Hz aggregator.

Every record is a fixed-length frame (magic, version, device id, flags,
timestamp, acceleration, orientation quaternion, CRC16-CCITT), so stream
resynchronization just scans for the magic bytes. The aggregator holds the
latest sample per device at each tick, masks out devices silent past the
dropout timeout, applies calibration, and routes data to body-location slots.
"""

import socket
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import calib as calib_mod
from . import synth, rotmath, tracker as tracker_mod
from .combos import (DeviceState, EarbudsState, Location, LocationMask,
                     PhoneState, WatchState, enumerate_device_states,
                     to_location_mask)

MAGIC = b"\x49\x50"
WIRE_VERSION = 1
# magic(2) + version(1) + device(1) + flags(1) + timestamp(8) + accel(12) + quat(16)
PAYLOAD_SIZE = 41
FRAME_SIZE = PAYLOAD_SIZE + 2

DEVICE_PHONE = 0
DEVICE_WATCH = 1
DEVICE_EARBUDS = 2
DEVICE_NAMES = {DEVICE_PHONE: "phone", DEVICE_WATCH: "watch", DEVICE_EARBUDS: "earbuds"}

FLAG_SCREEN_ON = 0x01
FLAG_PROXIMITY = 0x02

GRAVITY = 9.80665


class WireError(ValueError):
    pass


class BadMagic(WireError):
    pass


class BadCrc(WireError):
    pass


class Truncated(WireError):
    pass


class UnknownVersion(WireError):
    pass


def _crc16_table():
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021 if crc & 0x8000 else crc << 1) & 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _crc16_table()


def crc16_ccitt(data: bytes, crc: int = 0xFFFF) -> int:
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ b]
    return crc


@dataclass(frozen=True)
class WireFrame:
    device_id: int
    timestamp_us: int
    accel: tuple                 # (3,) m/s^2, device frame
    quat: tuple                  # (w, x, y, z) unit
    flags: int = 0

    @property
    def timestamp(self) -> float:
        return self.timestamp_us / 1e6

    def orient_matrix(self) -> np.ndarray:
        return rotmath.quat_to_matrix(np.asarray(self.quat))


def encode(frame: WireFrame) -> bytes:
    payload = MAGIC + struct.pack(
        "<BBBQ3f4f", WIRE_VERSION, frame.device_id, frame.flags,
        frame.timestamp_us, *frame.accel, *frame.quat)
    assert len(payload) == PAYLOAD_SIZE
    return payload + struct.pack("<H", crc16_ccitt(payload))


def decode(buf: bytes) -> WireFrame:
    if len(buf) < FRAME_SIZE:
        raise Truncated(f"need {FRAME_SIZE} bytes, have {len(buf)}")
    if buf[:2] != MAGIC:
        raise BadMagic("bad magic bytes")
    (crc,) = struct.unpack("<H", buf[PAYLOAD_SIZE:FRAME_SIZE])
    if crc16_ccitt(buf[:PAYLOAD_SIZE]) != crc:
        raise BadCrc("checksum mismatch")
    version, device_id, flags, ts = struct.unpack("<BBBQ", buf[2:13])
    if version != WIRE_VERSION:
        raise UnknownVersion(f"wire version {version}")
    vals = struct.unpack("<3f4f", buf[13:PAYLOAD_SIZE])
    return WireFrame(device_id, ts, tuple(vals[:3]), tuple(vals[3:]), flags)


class FrameStreamDecoder:
    """Incremental decoder with magic-scan resynchronization."""

    def __init__(self):
        self._buf = bytearray()
        self.errors = 0

    def feed(self, data: bytes):
        """Yield every complete valid frame found in the stream so far."""
        self._buf.extend(data)
        while True:
            start = self._buf.find(MAGIC)
            if start < 0:
                # keep a possible first magic byte at the tail
                if self._buf:
                    self.errors += len(self._buf) - 1
                    del self._buf[:-1]
                return
            if start > 0:
                self.errors += 1
                del self._buf[:start]
                continue
            if len(self._buf) < FRAME_SIZE:
                return
            try:
                frame = decode(bytes(self._buf[:FRAME_SIZE]))
            except (BadCrc, UnknownVersion):
                self.errors += 1
                del self._buf[:1]
                continue
            del self._buf[:FRAME_SIZE]
            yield frame


@dataclass(frozen=True)
class AggregatorConfig:
    tick_hz: float = 25.0
    timeout_s: float = 0.2       # silence before a device's slots are masked

    def __post_init__(self):
        if self.timeout_s < 2.0 / self.tick_hz:
            raise ValueError("timeout must cover at least two ticks")


# which device fills a slot when two map to the same body location
_SLOT_PRIORITY = {
    Location.LEFT_WRIST: (DEVICE_WATCH, DEVICE_PHONE),
    Location.RIGHT_WRIST: (DEVICE_WATCH, DEVICE_PHONE),
    Location.LEFT_POCKET: (DEVICE_PHONE, DEVICE_EARBUDS),
    Location.RIGHT_POCKET: (DEVICE_PHONE, DEVICE_EARBUDS),
    Location.HEAD: (DEVICE_EARBUDS, DEVICE_PHONE),
}

_CONNECT_EVENT = {
    DEVICE_PHONE: (tracker_mod.EventKind.PHONE_PRESENT, tracker_mod.EventKind.PHONE_ABSENT),
    DEVICE_WATCH: (tracker_mod.EventKind.WATCH_CONNECTED,
                   tracker_mod.EventKind.WATCH_DISCONNECTED),
    DEVICE_EARBUDS: (tracker_mod.EventKind.EARBUDS_CONNECTED,
                     tracker_mod.EventKind.EARBUDS_DISCONNECTED),
}


def device_locations(state: DeviceState) -> dict[int, Location]:
    """Body location streamed by each active device."""
    out = {}
    phone_loc = {PhoneState.LEFT_POCKET: Location.LEFT_POCKET,
                 PhoneState.RIGHT_POCKET: Location.RIGHT_POCKET,
                 PhoneState.LEFT_HAND: Location.LEFT_WRIST,
                 PhoneState.RIGHT_HAND: Location.RIGHT_WRIST,
                 PhoneState.AT_HEAD: Location.HEAD}.get(state.phone)
    if phone_loc is not None:
        out[DEVICE_PHONE] = phone_loc
    if state.watch is not WatchState.ABSENT:
        out[DEVICE_WATCH] = (Location.LEFT_WRIST if state.watch is WatchState.LEFT_WRIST
                             else Location.RIGHT_WRIST)
    buds_loc = {EarbudsState.IN_EARS: Location.HEAD,
                EarbudsState.CASE_LEFT_POCKET: Location.LEFT_POCKET,
                EarbudsState.CASE_RIGHT_POCKET: Location.RIGHT_POCKET}.get(state.earbuds)
    if buds_loc is not None:
        out[DEVICE_EARBUDS] = buds_loc
    return out


def realize_device_state(mask: LocationMask) -> DeviceState:
    """A minimal, deterministic device arrangement covering the mask.

    Prefers the fewest devices and avoids the phone-at-head placement when
    earbuds can provide the head slot.
    """
    best = None
    for i, s in enumerate(enumerate_device_states()):
        if to_location_mask(s) == mask:
            key = (s.active_device_count(), s.phone is PhoneState.AT_HEAD, i)
            if best is None or key < best[0]:
                best = (key, s)
    if best is None:
        raise ValueError(f"mask {mask} is not a canonical combination")
    return best[1]


@dataclass
class AggregateResult:
    frames: list                      # ImuFrame per tick (calibrated, global frame)
    masks: list                       # LocationMask of fresh slots per tick
    tick_times: np.ndarray
    events: list = field(default_factory=list)   # DeviceEvent
    decode_errors: int = 0


class Aggregator:
    """Single-consumer tick engine over per-device frame feeds.

    Placement comes either from a fixed/recorded DeviceState per tick or from
    a live Tracker fed with connectivity, screen/proximity, and motion events
    derived from the streams.
    """

    def __init__(self, cfg: AggregatorConfig | None = None,
                 profiles: calib_mod.CalibrationProfile | None = None,
                 placement: DeviceState | None = None,
                 tracker: tracker_mod.Tracker | None = None):
        if (placement is None) == (tracker is None):
            raise ValueError("exactly one of placement/tracker required")
        self.cfg = cfg or AggregatorConfig()
        self.profiles = profiles or calib_mod.CalibrationProfile.identity()
        self.placement = placement
        self.tracker = tracker
        self.events: list[tracker_mod.DeviceEvent] = []
        self._latest: dict[int, WireFrame] = {}
        self._alive: dict[int, bool] = {}
        self._flags: dict[int, int] = {}
        self._accel_hist: dict[int, list] = {}

    def _emit(self, t: float, kind: tracker_mod.EventKind, value=None):
        ev = tracker_mod.DeviceEvent(t, kind, value)
        self.events.append(ev)
        if self.tracker is not None:
            self.tracker.step(ev)

    def ingest(self, frame: WireFrame) -> None:
        dev = frame.device_id
        t = frame.timestamp
        if not self._alive.get(dev, False):
            self._emit(t, _CONNECT_EVENT[dev][0])
            self._alive[dev] = True
        if dev == DEVICE_PHONE:
            old = self._flags.get(dev, 0)
            if (old ^ frame.flags) & FLAG_SCREEN_ON:
                self._emit(t, tracker_mod.EventKind.SCREEN_ON
                           if frame.flags & FLAG_SCREEN_ON
                           else tracker_mod.EventKind.SCREEN_OFF)
            if (old ^ frame.flags) & FLAG_PROXIMITY:
                self._emit(t, tracker_mod.EventKind.PROXIMITY_TRIGGERED
                           if frame.flags & FLAG_PROXIMITY
                           else tracker_mod.EventKind.PROXIMITY_CLEAR)
            self._flags[dev] = frame.flags
            hist = self._accel_hist.setdefault(dev, [])
            hist.append((t, float(np.linalg.norm(frame.accel))))
            del hist[:max(0, len(hist) - int(self.cfg.tick_hz) - 1)]
            if len(hist) >= 2:
                mags = np.array([m for _, m in hist])
                self._emit(t, tracker_mod.EventKind.MOTION_MAGNITUDE,
                           float(mags.std() / GRAVITY))
        self._latest[dev] = frame

    def tick(self, now: float) -> tuple[synth.ImuFrame, LocationMask]:
        """Emit the synchronized frame for tick time `now` (latest-sample-hold)."""
        fresh: dict[int, WireFrame] = {}
        for dev, frame in self._latest.items():
            if now - frame.timestamp < self.cfg.timeout_s:
                fresh[dev] = frame
            elif self._alive.get(dev, False):
                self._emit(now, _CONNECT_EVENT[dev][1])
                self._alive[dev] = False
        if self.tracker is not None:
            state, _ = self.tracker.current()
        else:
            state = self.placement
        slots = device_locations(state)

        present = np.zeros(5, dtype=bool)
        accel = np.zeros((5, 3))
        orient = np.zeros((5, 3, 3))
        for loc in Location:
            for dev in _SLOT_PRIORITY[loc]:
                if slots.get(dev) == loc and dev in fresh:
                    f = fresh[dev]
                    cal = self.profiles.entries[loc]
                    bone, acc = calib_mod.apply_calibration(
                        cal, f.orient_matrix(), np.asarray(f.accel, dtype=np.float64))
                    present[int(loc)] = True
                    accel[int(loc)] = acc
                    orient[int(loc)] = bone
                    break
        frame = synth.ImuFrame(now, present, accel, orient)
        mask = LocationMask.of(*[loc for loc in Location if present[int(loc)]])
        return frame, mask


def aggregate(device_frames: dict[int, list[WireFrame]],
              placement=None, tracker: tracker_mod.Tracker | None = None,
              cfg: AggregatorConfig | None = None,
              profiles: calib_mod.CalibrationProfile | None = None,
              t0: float | None = None, num_ticks: int | None = None) -> AggregateResult:
    """Deterministic offline aggregation of timestamped device streams.

    `placement` is a DeviceState or a per-tick list of them; alternatively a
    Tracker consumes the derived events. Tick times are uniform at the
    configured rate starting from the earliest frame (or t0).
    """
    cfg = cfg or AggregatorConfig()
    per_tick = None
    if isinstance(placement, (list, tuple)):
        per_tick = list(placement)
        placement_state = per_tick[0]
    else:
        placement_state = placement
    agg = Aggregator(cfg, profiles,
                     placement=placement_state if tracker is None else None,
                     tracker=tracker)

    queue = sorted((f for frames in device_frames.values() for f in frames),
                   key=lambda f: (f.timestamp_us, f.device_id))
    if not queue and num_ticks is None:
        return AggregateResult([], [], np.empty(0), [], 0)
    if t0 is None:
        t0 = queue[0].timestamp if queue else 0.0
    dt = 1.0 / cfg.tick_hz
    if num_ticks is None:
        t_end = queue[-1].timestamp
        num_ticks = int(np.floor((t_end - t0) / dt + 1e-9)) + 1

    frames_out, masks_out = [], []
    times = t0 + dt * np.arange(num_ticks)
    qi = 0
    for k, now in enumerate(times):
        while qi < len(queue) and queue[qi].timestamp <= now + 1e-12:
            agg.ingest(queue[qi])
            qi += 1
        if per_tick is not None:
            agg.placement = per_tick[min(k, len(per_tick) - 1)]
        frame, mask = agg.tick(float(now))
        frames_out.append(frame)
        masks_out.append(mask)
    return AggregateResult(frames_out, masks_out, times, agg.events, 0)


# ---------------------------------------------------------------------------
# replay: turn a recorded dataset back into simulated device streams

def _wire_flags(state: DeviceState) -> int:
    if state.phone in (PhoneState.LEFT_HAND, PhoneState.RIGHT_HAND):
        return FLAG_SCREEN_ON
    if state.phone in (PhoneState.LEFT_POCKET, PhoneState.RIGHT_POCKET):
        return FLAG_PROXIMITY
    return 0


def replay_wire_frames(ds: synth.ImuDataset):
    """Per-device WireFrames reproducing a recorded dataset's streams.

    Streams are laid out on one continuous timeline (a gap of one tick
    between streams). Returns (device_frames, per-tick DeviceStates,
    per-tick times).
    """
    dt = 1.0 / ds.fps
    device_frames: dict[int, list[WireFrame]] = {}
    states, times = [], []
    t_base = 0.0
    for mask, span in ds.streams():
        state = realize_device_state(mask)
        slots = device_locations(state)
        for i, frame in enumerate(ds.frames[span]):
            t = t_base + i * dt
            states.append(state)
            times.append(t)
            for dev, loc in slots.items():
                if not frame.present[int(loc)]:
                    continue
                # smoothing can leave a near-rotation; the wire carries the
                # projected rotation, so derive the device-frame accel from it
                R = rotmath.nearest_rotation(frame.orient[int(loc)])
                quat = rotmath.matrix_to_quat(R)
                accel_dev = R.T @ frame.accel[int(loc)]
                flags = _wire_flags(state) if dev == DEVICE_PHONE else 0
                device_frames.setdefault(dev, []).append(WireFrame(
                    dev, int(round(t * 1e6)),
                    tuple(np.asarray(accel_dev, dtype=np.float32)),
                    tuple(np.asarray(quat, dtype=np.float32)), flags))
        t_base += len(ds.frames[span]) * dt + dt
    return device_frames, states, np.asarray(times)


def replay_and_aggregate(ds: synth.ImuDataset, cfg: AggregatorConfig | None = None,
                         profiles: calib_mod.CalibrationProfile | None = None) -> AggregateResult:
    """Loop a dataset through the wire protocol and back into ticks."""
    if not ds.frames:
        return AggregateResult([], [], np.empty(0), [], 0)
    device_frames, states, times = replay_wire_frames(ds)
    encoded = {dev: [decode(encode(f)) for f in frames]
               for dev, frames in device_frames.items()}
    return aggregate(encoded, placement=states, cfg=cfg, profiles=profiles,
                     t0=float(times[0]) if len(times) else 0.0,
                     num_ticks=len(times) or None)


def result_to_dataset(result: AggregateResult, fps: float) -> synth.ImuDataset:
    mask_ids = np.array([m.bits for m in result.masks], dtype=np.uint8)
    return synth.ImuDataset(fps, result.frames, mask_ids, None)


# ---------------------------------------------------------------------------
# live transport: fixed-length frames over a local TCP socket

def serve_replay(ds: synth.ImuDataset, port: int, speed: float = 1.0,
                 host: str = "127.0.0.1", ready=None) -> None:
    """Serve a dataset's wire frames over TCP, paced by monotonic deadlines."""
    device_frames, _, _ = replay_wire_frames(ds)
    timeline = sorted((f for frames in device_frames.values() for f in frames),
                      key=lambda f: (f.timestamp_us, f.device_id))
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        srv.bind((host, port))
        srv.listen(1)
        if ready is not None:
            ready.set()
        conn, _ = srv.accept()
        with conn:
            start = time.monotonic()
            t0 = timeline[0].timestamp if timeline else 0.0
            for f in timeline:
                deadline = start + (f.timestamp - t0) / speed
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                conn.sendall(encode(f))
    finally:
        srv.close()


def read_stream(host: str, port: int, timeout: float = 10.0):
    """Connect to a frame server and yield decoded WireFrames until EOF."""
    with socket.create_connection((host, port), timeout=timeout) as conn:
        conn.settimeout(timeout)
        decoder = FrameStreamDecoder()
        while True:
            try:
                data = conn.recv(4096)
            except socket.timeout:
                return
            if not data:
                return
            yield from decoder.feed(data)
