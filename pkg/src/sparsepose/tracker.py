"""Active-device tracking: device events + user preferences -> placement.

Heuristics: a phone is in the hand when the screen is on and the user is
moving; in a pocket when the screen is off and the proximity sensor is
covered. Watch-to-phone UWB distance picks the side when a watch is
connected, otherwise the user's stated defaults apply. A connected watch on
a moving user counts as worn; connected earbuds are in the ears.
"""

import enum
from dataclasses import dataclass, field, replace

from .combos import (DeviceState, EarbudsState, LocationMask, PhoneState,
                     WatchState, to_location_mask)


@dataclass(frozen=True)
class TrackerConfig:
    # the paper gives no numeric thresholds; these are explicit choices
    motion_threshold_g: float = 0.02     # rolling accel-magnitude std, in g
    uwb_near_m: float = 0.35             # watch-phone boundary
    uwb_hysteresis_m: float = 0.05       # extra distance before leaving "near"
    stale_timeout_s: float = 2.0         # motion/UWB readings older than this are stale


class EventKind(enum.Enum):
    SCREEN_ON = "screen_on"
    SCREEN_OFF = "screen_off"
    PROXIMITY_TRIGGERED = "proximity_triggered"
    PROXIMITY_CLEAR = "proximity_clear"
    MOTION_MAGNITUDE = "motion"          # value: rolling accel std in g
    UWB_DISTANCE = "uwb"                 # value: watch-phone distance in m
    WATCH_CONNECTED = "watch_connected"
    WATCH_DISCONNECTED = "watch_disconnected"
    EARBUDS_CONNECTED = "earbuds_connected"
    EARBUDS_DISCONNECTED = "earbuds_disconnected"
    EARBUDS_CASED = "earbuds_cased"      # scripted only; value: "left"|"right"
    PHONE_PRESENT = "phone_present"
    PHONE_ABSENT = "phone_absent"


@dataclass(frozen=True)
class DeviceEvent:
    timestamp: float
    kind: EventKind
    value: float | str | None = None


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    def other(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


@dataclass(frozen=True)
class UserPrefs:
    default_pocket: Side = Side.LEFT
    default_hand: Side = Side.RIGHT
    watch_wrist: Side = Side.LEFT


@dataclass(frozen=True)
class TrackerState:
    time: float = 0.0
    screen_on: bool = False
    proximity: bool = False
    phone_present: bool = True
    watch_connected: bool = False
    earbuds_connected: bool = False
    earbuds_case_pocket: Side | None = None
    motion_g: float = 0.0
    motion_time: float = -1e18
    uwb_near: bool = False
    uwb_time: float = -1e18


def step(state: TrackerState, event: DeviceEvent, prefs: UserPrefs,
         cfg: TrackerConfig | None = None):
    """Apply one event. Returns (new state, DeviceState, LocationMask)."""
    cfg = cfg or TrackerConfig()
    s = _apply_event(state, event, cfg)
    device_state = derive_device_state(s, prefs, cfg)
    if (device_state.phone is PhoneState.ABSENT
            and device_state.watch is WatchState.ABSENT
            and device_state.earbuds is EarbudsState.ABSENT):
        return s, device_state, LocationMask.empty()
    return s, device_state, to_location_mask(device_state)


def _apply_event(s: TrackerState, e: DeviceEvent, cfg: TrackerConfig) -> TrackerState:
    k = e.kind
    t = e.timestamp
    if k is EventKind.SCREEN_ON:
        return replace(s, time=t, screen_on=True)
    if k is EventKind.SCREEN_OFF:
        return replace(s, time=t, screen_on=False)
    if k is EventKind.PROXIMITY_TRIGGERED:
        return replace(s, time=t, proximity=True)
    if k is EventKind.PROXIMITY_CLEAR:
        return replace(s, time=t, proximity=False)
    if k is EventKind.MOTION_MAGNITUDE:
        return replace(s, time=t, motion_g=float(e.value), motion_time=t)
    if k is EventKind.UWB_DISTANCE:
        d = float(e.value)
        if s.uwb_near:
            near = d <= cfg.uwb_near_m + cfg.uwb_hysteresis_m
        else:
            near = d < cfg.uwb_near_m
        return replace(s, time=t, uwb_near=near, uwb_time=t)
    if k is EventKind.WATCH_CONNECTED:
        return replace(s, time=t, watch_connected=True)
    if k is EventKind.WATCH_DISCONNECTED:
        return replace(s, time=t, watch_connected=False)
    if k is EventKind.EARBUDS_CONNECTED:
        return replace(s, time=t, earbuds_connected=True, earbuds_case_pocket=None)
    if k is EventKind.EARBUDS_DISCONNECTED:
        return replace(s, time=t, earbuds_connected=False)
    if k is EventKind.EARBUDS_CASED:
        side = Side(e.value) if e.value is not None else None
        return replace(s, time=t, earbuds_connected=False, earbuds_case_pocket=side)
    if k is EventKind.PHONE_PRESENT:
        return replace(s, time=t, phone_present=True)
    if k is EventKind.PHONE_ABSENT:
        return replace(s, time=t, phone_present=False)
    return replace(s, time=t)   # unknown events ignored


def _moving(s: TrackerState, cfg: TrackerConfig) -> bool:
    return (s.motion_g > cfg.motion_threshold_g
            and s.time - s.motion_time <= cfg.stale_timeout_s)


def _uwb_side(s: TrackerState, prefs: UserPrefs, cfg: TrackerConfig) -> Side | None:
    """Side suggested by UWB: near the watch means the watch's side."""
    if not s.watch_connected or s.time - s.uwb_time > cfg.stale_timeout_s:
        return None
    return prefs.watch_wrist if s.uwb_near else prefs.watch_wrist.other()


def derive_device_state(s: TrackerState, prefs: UserPrefs,
                        cfg: TrackerConfig | None = None) -> DeviceState:
    cfg = cfg or TrackerConfig()
    moving = _moving(s, cfg)

    if not s.phone_present:
        phone = PhoneState.ABSENT
    elif s.screen_on and moving:
        side = _uwb_side(s, prefs, cfg) or prefs.default_hand
        phone = PhoneState.LEFT_HAND if side is Side.LEFT else PhoneState.RIGHT_HAND
    elif not s.screen_on and s.proximity:
        side = _uwb_side(s, prefs, cfg) or prefs.default_pocket
        phone = PhoneState.LEFT_POCKET if side is Side.LEFT else PhoneState.RIGHT_POCKET
    else:
        phone = PhoneState.ABSENT    # present but set down / not on the body

    if s.watch_connected and moving:
        watch = (WatchState.LEFT_WRIST if prefs.watch_wrist is Side.LEFT
                 else WatchState.RIGHT_WRIST)
    else:
        watch = WatchState.ABSENT

    if s.earbuds_connected:
        earbuds = EarbudsState.IN_EARS
    elif s.earbuds_case_pocket is Side.LEFT:
        earbuds = EarbudsState.CASE_LEFT_POCKET
    elif s.earbuds_case_pocket is Side.RIGHT:
        earbuds = EarbudsState.CASE_RIGHT_POCKET
    else:
        earbuds = EarbudsState.ABSENT

    return DeviceState(phone, watch, earbuds)


class Tracker:
    """Stateful wrapper around the pure step function."""

    def __init__(self, prefs: UserPrefs, cfg: TrackerConfig | None = None,
                 state: TrackerState | None = None):
        self.prefs = prefs
        self.cfg = cfg or TrackerConfig()
        self.state = state or TrackerState()

    def step(self, event: DeviceEvent):
        self.state, device_state, mask = step(self.state, event, self.prefs, self.cfg)
        return device_state, mask

    def current(self):
        ds = derive_device_state(self.state, self.prefs, self.cfg)
        if (ds.phone is PhoneState.ABSENT and ds.watch is WatchState.ABSENT
                and ds.earbuds is EarbudsState.ABSENT):
            return ds, LocationMask.empty()
        return ds, to_location_mask(ds)


# ---------------------------------------------------------------------------
# scenario files: "pref <name> <side>" headers, then "t=<s> <event> [value]"

def parse_scenario(text: str):
    """Parse a scripted trace. Returns (UserPrefs, [DeviceEvent])."""
    prefs = {}
    events = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "pref":
            if len(parts) != 3 or parts[1] not in ("pocket", "hand", "watch"):
                raise ValueError(f"line {lineno}: bad pref line")
            key = {"pocket": "default_pocket", "hand": "default_hand",
                   "watch": "watch_wrist"}[parts[1]]
            prefs[key] = Side(parts[2])
            continue
        if not parts[0].startswith("t="):
            raise ValueError(f"line {lineno}: expected 't=<seconds>'")
        t = float(parts[0][2:])
        kind = EventKind(parts[1])
        value = None
        if len(parts) > 2:
            value = parts[2] if kind is EventKind.EARBUDS_CASED else float(parts[2])
        events.append(DeviceEvent(t, kind, value))
    if any(events[i].timestamp > events[i + 1].timestamp for i in range(len(events) - 1)):
        raise ValueError("event timestamps must be non-decreasing")
    return UserPrefs(**prefs), events


def run_scenario(text: str, cfg: TrackerConfig | None = None):
    """Replay a scripted trace; one row per placement transition.

    Returns [(timestamp, DeviceState, LocationMask)].
    """
    prefs, events = parse_scenario(text)
    tracker = Tracker(prefs, cfg)
    rows = []
    last = None
    for e in events:
        ds, mask = tracker.step(e)
        if (ds, mask) != last:
            rows.append((e.timestamp, ds, mask))
            last = (ds, mask)
    return rows
