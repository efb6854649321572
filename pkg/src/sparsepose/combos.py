"""Device-position states and the 24 canonical body-location combinations."""

import enum
import itertools
from dataclasses import dataclass


class Location(enum.IntEnum):
    """Canonical sensor slots, in fixed model-input order."""

    LEFT_WRIST = 0
    RIGHT_WRIST = 1
    LEFT_POCKET = 2
    RIGHT_POCKET = 3
    HEAD = 4


class PhoneState(enum.Enum):
    LEFT_POCKET = "left_pocket"
    RIGHT_POCKET = "right_pocket"
    LEFT_HAND = "left_hand"
    RIGHT_HAND = "right_hand"
    AT_HEAD = "at_head"
    ABSENT = "absent"


class WatchState(enum.Enum):
    LEFT_WRIST = "left_wrist"
    RIGHT_WRIST = "right_wrist"
    ABSENT = "absent"


class EarbudsState(enum.Enum):
    IN_EARS = "in_ears"
    CASE_LEFT_POCKET = "case_left_pocket"
    CASE_RIGHT_POCKET = "case_right_pocket"
    ABSENT = "absent"


class InvalidState(ValueError):
    """Device arrangement outside the supported set."""


@dataclass(frozen=True)
class DeviceState:
    phone: PhoneState
    watch: WatchState
    earbuds: EarbudsState

    def validate(self) -> None:
        if self.earbuds is EarbudsState.IN_EARS and self.phone is PhoneState.AT_HEAD:
            raise InvalidState("phone at head while earbuds are worn")
        if (self.phone is PhoneState.ABSENT and self.watch is WatchState.ABSENT
                and self.earbuds is EarbudsState.ABSENT):
            raise InvalidState("no active device")

    def active_device_count(self) -> int:
        return sum([self.phone is not PhoneState.ABSENT,
                    self.watch is not WatchState.ABSENT,
                    self.earbuds is not EarbudsState.ABSENT])


@dataclass(frozen=True, order=True)
class LocationMask:
    """Subset of the five sensor slots, stored as a 5-bit id (bit i = slot i)."""

    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < 32:
            raise ValueError("mask id out of range")

    @classmethod
    def of(cls, *locations: Location) -> "LocationMask":
        bits = 0
        for loc in locations:
            bits |= 1 << int(loc)
        return cls(bits)

    @classmethod
    def full(cls) -> "LocationMask":
        return cls(0b11111)

    @classmethod
    def empty(cls) -> "LocationMask":
        return cls(0)

    def __contains__(self, loc: Location) -> bool:
        return bool(self.bits >> int(loc) & 1)

    def __iter__(self):
        return (loc for loc in Location if loc in self)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __str__(self) -> str:
        return "+".join(loc.name for loc in self) if self.bits else "(none)"


_PHONE_LOCATION = {
    PhoneState.LEFT_POCKET: Location.LEFT_POCKET,
    PhoneState.RIGHT_POCKET: Location.RIGHT_POCKET,
    PhoneState.LEFT_HAND: Location.LEFT_WRIST,
    PhoneState.RIGHT_HAND: Location.RIGHT_WRIST,
    PhoneState.AT_HEAD: Location.HEAD,
}

_WATCH_LOCATION = {
    WatchState.LEFT_WRIST: Location.LEFT_WRIST,
    WatchState.RIGHT_WRIST: Location.RIGHT_WRIST,
}

_EARBUDS_LOCATION = {
    EarbudsState.IN_EARS: Location.HEAD,
    EarbudsState.CASE_LEFT_POCKET: Location.LEFT_POCKET,
    EarbudsState.CASE_RIGHT_POCKET: Location.RIGHT_POCKET,
}


def to_location_mask(state: DeviceState) -> LocationMask:
    """Map a device arrangement to body locations; co-located devices merge."""
    state.validate()
    locs = []
    if state.phone in _PHONE_LOCATION:
        locs.append(_PHONE_LOCATION[state.phone])
    if state.watch in _WATCH_LOCATION:
        locs.append(_WATCH_LOCATION[state.watch])
    if state.earbuds in _EARBUDS_LOCATION:
        locs.append(_EARBUDS_LOCATION[state.earbuds])
    return LocationMask.of(*locs)


def enumerate_device_states() -> list[DeviceState]:
    """All 68 valid device arrangements (72-state product minus exclusions)."""
    states = []
    for p, w, e in itertools.product(PhoneState, WatchState, EarbudsState):
        s = DeviceState(p, w, e)
        try:
            s.validate()
        except InvalidState:
            continue
        states.append(s)
    return states


def raw_product_size() -> int:
    return len(PhoneState) * len(WatchState) * len(EarbudsState)


def count_by_active_locations(states=None) -> dict[int, int]:
    """Arrangement counts keyed by how many distinct body points they cover.

    "Active device" counts in the combination analysis refer to merged body
    points (a watch and a phone in the same hand count once), not to raw
    device counts.
    """
    states = enumerate_device_states() if states is None else states
    counts: dict[int, int] = {}
    for s in states:
        n = len(to_location_mask(s))
        counts[n] = counts.get(n, 0) + 1
    return counts


def enumerate_location_sets() -> list[LocationMask]:
    """The 24 reachable location combinations, in ascending mask-id order."""
    masks = {to_location_mask(s) for s in enumerate_device_states()}
    return sorted(masks, key=lambda m: m.bits)
