import importlib.resources

import pytest

from sparsepose import tracker
from sparsepose.combos import (EarbudsState, Location, LocationMask, PhoneState,
                               WatchState, enumerate_location_sets)
from sparsepose.tracker import DeviceEvent, EventKind, Side, Tracker, UserPrefs

# hand-derived from the heuristic table; see the scenario file for the script
EXPECTED_15 = [
    (1.0, PhoneState.LEFT_POCKET, WatchState.ABSENT, EarbudsState.ABSENT, 0b00100),
    (5.2, PhoneState.RIGHT_HAND, WatchState.ABSENT, EarbudsState.ABSENT, 0b00010),
    (7.0, PhoneState.RIGHT_HAND, WatchState.ABSENT, EarbudsState.IN_EARS, 0b10010),
    (9.0, PhoneState.ABSENT, WatchState.ABSENT, EarbudsState.IN_EARS, 0b10000),
    (11.0, PhoneState.LEFT_POCKET, WatchState.ABSENT, EarbudsState.IN_EARS, 0b10100),
    (13.2, PhoneState.LEFT_POCKET, WatchState.LEFT_WRIST, EarbudsState.IN_EARS, 0b10101),
    (15.0, PhoneState.LEFT_POCKET, WatchState.LEFT_WRIST, EarbudsState.ABSENT, 0b00101),
    (17.0, PhoneState.RIGHT_POCKET, WatchState.LEFT_WRIST, EarbudsState.ABSENT, 0b01001),
    (18.5, PhoneState.RIGHT_HAND, WatchState.LEFT_WRIST, EarbudsState.ABSENT, 0b00011),
    (20.5, PhoneState.LEFT_HAND, WatchState.LEFT_WRIST, EarbudsState.ABSENT, 0b00001),
    (21.5, PhoneState.LEFT_HAND, WatchState.LEFT_WRIST, EarbudsState.IN_EARS, 0b10001),
    (22.5, PhoneState.RIGHT_HAND, WatchState.LEFT_WRIST, EarbudsState.IN_EARS, 0b10011),
    (23.5, PhoneState.ABSENT, WatchState.LEFT_WRIST, EarbudsState.IN_EARS, 0b10001),
    (23.7, PhoneState.RIGHT_POCKET, WatchState.LEFT_WRIST, EarbudsState.IN_EARS, 0b11001),
    (25.5, PhoneState.RIGHT_POCKET, WatchState.LEFT_WRIST,
     EarbudsState.CASE_LEFT_POCKET, 0b01101),
]


def shipped_scenario() -> str:
    return (importlib.resources.files("sparsepose") / "data"
            / "active_device_15.txt").read_text()


class TestHeuristics:
    def test_screen_on_with_motion_default_hand(self):
        prefs = UserPrefs(default_hand=Side.RIGHT)
        t = Tracker(prefs)
        t.step(DeviceEvent(0.0, EventKind.MOTION_MAGNITUDE, 0.05))
        ds, mask = t.step(DeviceEvent(0.1, EventKind.SCREEN_ON))
        assert ds.phone is PhoneState.RIGHT_HAND
        assert mask == LocationMask.of(Location.RIGHT_WRIST)

    def test_pocket_side_follows_watch_uwb_near(self):
        prefs = UserPrefs(default_pocket=Side.RIGHT, watch_wrist=Side.LEFT)
        t = Tracker(prefs)
        t.step(DeviceEvent(0.0, EventKind.WATCH_CONNECTED))
        t.step(DeviceEvent(0.1, EventKind.UWB_DISTANCE, 0.2))
        ds, _ = t.step(DeviceEvent(0.2, EventKind.PROXIMITY_TRIGGERED))
        assert ds.phone is PhoneState.LEFT_POCKET   # near the left-wrist watch

    def test_earbuds_connected_head_active(self):
        t = Tracker(UserPrefs())
        ds, mask = t.step(DeviceEvent(0.0, EventKind.EARBUDS_CONNECTED))
        assert ds.earbuds is EarbudsState.IN_EARS
        assert Location.HEAD in mask

    def test_no_uwb_defaults_to_prefs(self):
        prefs = UserPrefs(default_pocket=Side.RIGHT)
        t = Tracker(prefs)
        ds, _ = t.step(DeviceEvent(0.0, EventKind.PROXIMITY_TRIGGERED))
        assert ds.phone is PhoneState.RIGHT_POCKET

    def test_stale_motion_drops_hand(self):
        t = Tracker(UserPrefs())
        t.step(DeviceEvent(0.0, EventKind.MOTION_MAGNITUDE, 0.05))
        ds, _ = t.step(DeviceEvent(0.1, EventKind.SCREEN_ON))
        assert ds.phone in (PhoneState.LEFT_HAND, PhoneState.RIGHT_HAND)
        ds, mask = t.step(DeviceEvent(5.0, EventKind.SCREEN_ON))
        assert ds.phone is PhoneState.ABSENT
        assert mask == LocationMask.empty()

    def test_watch_needs_motion(self):
        t = Tracker(UserPrefs(watch_wrist=Side.LEFT))
        ds, _ = t.step(DeviceEvent(0.0, EventKind.WATCH_CONNECTED))
        assert ds.watch is WatchState.ABSENT
        ds, _ = t.step(DeviceEvent(0.1, EventKind.MOTION_MAGNITUDE, 0.05))
        assert ds.watch is WatchState.LEFT_WRIST

    def test_uwb_hysteresis(self):
        cfg = tracker.TrackerConfig()
        prefs = UserPrefs(watch_wrist=Side.LEFT)
        t = Tracker(prefs, cfg)
        t.step(DeviceEvent(0.0, EventKind.WATCH_CONNECTED))
        t.step(DeviceEvent(0.1, EventKind.UWB_DISTANCE, 0.2))
        assert t.state.uwb_near
        # inside the hysteresis band: stays near
        t.step(DeviceEvent(0.2, EventKind.UWB_DISTANCE, 0.38))
        assert t.state.uwb_near
        t.step(DeviceEvent(0.3, EventKind.UWB_DISTANCE, 0.45))
        assert not t.state.uwb_near
        t.step(DeviceEvent(0.4, EventKind.UWB_DISTANCE, 0.38))
        assert not t.state.uwb_near

    def test_phone_at_head_never_emitted(self):
        # no heuristic produces the at-head state; head comes from earbuds only
        text = shipped_scenario()
        for _, ds, _ in tracker.run_scenario(text):
            assert ds.phone is not PhoneState.AT_HEAD


class TestScenario:
    def test_shipped_trace_exact_sequence(self):
        rows = tracker.run_scenario(shipped_scenario())
        assert len(rows) == len(EXPECTED_15)
        for (t, ds, mask), (et, ep, ew, ee, ebits) in zip(rows, EXPECTED_15):
            assert t == pytest.approx(et)
            assert ds.phone is ep and ds.watch is ew and ds.earbuds is ee
            assert mask.bits == ebits

    def test_15_distinct_combinations(self):
        rows = tracker.run_scenario(shipped_scenario())
        combos_seen = {(ds.phone, ds.watch, ds.earbuds) for _, ds, _ in rows}
        assert len(combos_seen) == 15

    def test_all_masks_canonical(self):
        canonical = set(enumerate_location_sets())
        for _, _, mask in tracker.run_scenario(shipped_scenario()):
            assert mask in canonical or mask == LocationMask.empty()

    def test_replay_deterministic(self):
        text = shipped_scenario()
        assert tracker.run_scenario(text) == tracker.run_scenario(text)

    def test_parse_rejects_bad_lines(self):
        with pytest.raises(ValueError):
            tracker.parse_scenario("pref pocket middle")
        with pytest.raises(ValueError):
            tracker.parse_scenario("0.5 screen_on")
        with pytest.raises(ValueError):
            tracker.parse_scenario("t=2.0 screen_on\nt=1.0 screen_off")

    def test_comments_and_blank_lines(self):
        prefs, events = tracker.parse_scenario(
            "# comment\n\npref hand left\nt=1.0 screen_on # inline\n")
        assert prefs.default_hand is Side.LEFT
        assert len(events) == 1 and events[0].kind is EventKind.SCREEN_ON
