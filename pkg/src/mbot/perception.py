"""Perception stages over the sensor topics.

Two detectors, each a deterministic state machine over a timestamped
input trace: radar presence with EMA smoothing and dual-threshold
hysteresis, and touch classification separating brief taps from sustained
holds. Replaying a logged trace reproduces the identical event sequence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .bus import Envelope, MessageBus, Schema
from .clock import s_to_ns
from .errors import MError

log = logging.getLogger(__name__)

PRESENCE_TOPIC = "/perception/presence_events"
TOUCH_TOPIC = "/perception/touch_gestures"


class PerceptionError(MError):
    pass


class ProtocolViolation(PerceptionError):
    """Touch press/release ordering was violated for a pad."""


@dataclass(frozen=True)
class DetectorConfig:
    ema_alpha: float = 0.3
    t_hi: float = 0.6
    t_lo: float = 0.3
    dwell_s: float = 2.0
    hold_s: float = 1.0
    tap_max_s: float = 0.4


@dataclass
class PresenceState:
    present: bool = False
    since_ns: int = 0
    energy_ema: float = 0.0


@dataclass(frozen=True)
class PresenceEvent:
    kind: str  # entered | left
    t_ns: int
    energy_ema: float


class PresenceDetector:
    """Hysteresis over EMA-smoothed radar energy.

    `entered` fires when the EMA crosses above t_hi from absent; `left`
    fires only after the EMA has stayed below t_lo for the dwell period,
    so oscillation between the two thresholds produces no chatter.
    """

    def __init__(self, config: DetectorConfig = DetectorConfig()):
        if not 0 < config.ema_alpha <= 1:
            raise PerceptionError("ema_alpha must be in (0, 1]")
        if not 0 <= config.t_lo < config.t_hi <= 1:
            raise PerceptionError("thresholds must satisfy 0 <= t_lo < t_hi <= 1")
        self.config = config
        self.state = PresenceState()
        self._below_since: Optional[int] = None

    def update(self, energy: float, t_ns: int) -> Optional[PresenceEvent]:
        if not 0.0 <= energy <= 1.0:
            raise PerceptionError(f"energy must be in [0, 1], got {energy}")
        cfg = self.config
        st = self.state
        st.energy_ema = cfg.ema_alpha * energy + (1 - cfg.ema_alpha) * st.energy_ema
        if not st.present:
            if st.energy_ema > cfg.t_hi:
                st.present = True
                st.since_ns = t_ns
                self._below_since = None
                return PresenceEvent("entered", t_ns, st.energy_ema)
            return None
        if st.energy_ema < cfg.t_lo:
            if self._below_since is None:
                self._below_since = t_ns
            elif t_ns - self._below_since >= s_to_ns(cfg.dwell_s):
                st.present = False
                st.since_ns = t_ns
                self._below_since = None
                return PresenceEvent("left", t_ns, st.energy_ema)
        else:
            self._below_since = None
        return None


@dataclass(frozen=True)
class TouchEvent:
    pad_id: str
    kind: str  # tap | hold_start | hold_end
    t_ns: int
    contact_duration_s: Optional[float] = None  # tap and hold_end only


@dataclass
class _PadState:
    pressed_at_ns: Optional[int] = None
    hold_started: bool = False


class TouchClassifier:
    """Tap versus hold over press/release edges.

    A contact released within tap_max is a tap. A contact reaching hold_s
    emits hold_start at exactly press + hold_s (via `poll`, which the node
    drives from a timer) and hold_end on release. Contacts in between fall
    into a dead zone and emit nothing, avoiding ambiguous gestures.
    """

    def __init__(self, config: DetectorConfig = DetectorConfig()):
        if not 0 < config.tap_max_s < config.hold_s:
            raise PerceptionError("need 0 < tap_max < hold threshold")
        self.config = config
        self._pads: dict[str, _PadState] = {}

    def _pad(self, pad_id: str) -> _PadState:
        return self._pads.setdefault(pad_id, _PadState())

    def update(self, pad_id: str, pressed: bool, t_ns: int) -> list[TouchEvent]:
        pad = self._pad(pad_id)
        if pressed:
            if pad.pressed_at_ns is not None:
                raise ProtocolViolation(f"double press on pad {pad_id!r}")
            pad.pressed_at_ns = t_ns
            pad.hold_started = False
            return []
        if pad.pressed_at_ns is None:
            raise ProtocolViolation(f"release without press on pad {pad_id!r}")
        start = pad.pressed_at_ns
        duration_s = (t_ns - start) / 1e9
        pad.pressed_at_ns = None
        events: list[TouchEvent] = []
        if pad.hold_started or duration_s >= self.config.hold_s:
            if not pad.hold_started:
                # poll never ran; emit the hold_start it would have produced
                events.append(TouchEvent(
                    pad_id, "hold_start", start + s_to_ns(self.config.hold_s)))
            events.append(TouchEvent(pad_id, "hold_end", t_ns,
                                     contact_duration_s=duration_s))
        elif duration_s <= self.config.tap_max_s:
            events.append(TouchEvent(pad_id, "tap", t_ns,
                                     contact_duration_s=duration_s))
        pad.hold_started = False
        return events

    def poll(self, t_ns: int) -> list[TouchEvent]:
        """Emit hold_start for any contact that has reached the threshold."""
        events: list[TouchEvent] = []
        for pad_id, pad in self._pads.items():
            if (pad.pressed_at_ns is not None and not pad.hold_started
                    and t_ns - pad.pressed_at_ns >= s_to_ns(self.config.hold_s)):
                pad.hold_started = True
                events.append(TouchEvent(
                    pad_id, "hold_start",
                    pad.pressed_at_ns + s_to_ns(self.config.hold_s)))
        return events


# ---------------------------------------------------------------------------
# bus wiring

PERCEPTION_SCHEMAS = [
    Schema("presence_event", 1, (("kind", "str"), ("t_mono", "int"),
                                 ("energy_ema", "number"))),
    Schema("touch_gesture", 1, (("pad_id", "str"), ("kind", "str"),
                                ("t_mono", "int"))),
]


class PerceptionNode:
    """Feeds both detectors from the sensor topics and republishes their
    events. Identical behavior against the simulator or a real backend."""

    NODE_ID = "perception"

    def __init__(self, bus: MessageBus,
                 config: DetectorConfig = DetectorConfig()):
        self.bus = bus
        self.config = config
        self.presence = PresenceDetector(config)
        self.touch = TouchClassifier(config)
        self._subs = []
        self._started = False

    def start(self) -> "PerceptionNode":
        if self._started:
            return self
        self._started = True
        bus = self.bus
        bus.register_node(self.NODE_ID)
        for schema in PERCEPTION_SCHEMAS:
            bus.register_schema(schema)
        bus.create_topic(PRESENCE_TOPIC, "presence_event@1", self.NODE_ID)
        bus.create_topic(TOUCH_TOPIC, "touch_gesture@1", self.NODE_ID)
        self._presence_pub = bus.create_publisher(PRESENCE_TOPIC, self.NODE_ID)
        self._touch_pub = bus.create_publisher(TOUCH_TOPIC, self.NODE_ID)
        self._subs.append(bus.subscribe("/m/radar_energy", self._on_radar))
        self._subs.append(bus.subscribe("/m/touch_events", self._on_touch))
        return self

    def stop(self) -> None:
        for sub in self._subs:
            sub.close()
        self._subs.clear()

    def _on_radar(self, env: Envelope) -> None:
        event = self.presence.update(env.payload["energy"], env.t_mono)
        if event is not None:
            self._presence_pub.publish({
                "kind": event.kind, "t_mono": event.t_ns,
                "energy_ema": event.energy_ema})

    def _on_touch(self, env: Envelope) -> None:
        pad_id = env.payload["pad_id"]
        pressed = env.payload["pressed"]
        try:
            events = self.touch.update(pad_id, pressed, env.t_mono)
        except ProtocolViolation:
            log.warning("touch protocol violation on pad %r ignored", pad_id)
            return
        if pressed:
            # arm the hold threshold check at the exact crossing instant
            self.bus.scheduler.call_at(
                env.t_mono + s_to_ns(self.config.hold_s), self._poll_holds)
        self._emit_touch(events)

    def _poll_holds(self) -> None:
        self._emit_touch(self.touch.poll(self.bus.clock.now_ns()))

    def _emit_touch(self, events) -> None:
        for ev in events:
            payload = {"pad_id": ev.pad_id, "kind": ev.kind, "t_mono": ev.t_ns}
            if ev.contact_duration_s is not None:
                payload["contact_duration"] = ev.contact_duration_s
            self._touch_pub.publish(payload)
