"""Simulated robot backend plus the hardware interface stub.

The simulator registers the full interface set a physical backend would:
joint state streaming, face and haptic state, radar and touch sensor
topics, a joint target service, and timeline/speech actions. A separate
hardware stub registers the identical set while driving nothing, so
interface parity between the two backends is an executable check
(`registry_diff` of their exports) instead of a claim.

Servo motion is pure slew-rate limiting: each tick moves the position
toward the target by at most v_max * dt, reaching it exactly rather than
asymptotically.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .bus import GoalContext, MessageBus, Publisher, Schema
from .clock import s_to_ns
from .errors import InvalidDuration, MError
from .expression import ExpressionEngine, Timeline, TimelineError
from .model import JointId, JointState, RobotDescription

log = logging.getLogger(__name__)


class SimError(MError):
    pass


class InvalidScenario(SimError):
    pass


# ---------------------------------------------------------------------------
# servo motion model

@dataclass
class ServoSim:
    """One slew-rate-limited servo. Position units are radians."""

    current: float
    target: float
    v_max: float
    velocity: float = 0.0

    def step(self, dt_s: float) -> "ServoSim":
        if dt_s <= 0:
            raise SimError("dt must be positive")
        gap = self.target - self.current
        move = min(abs(gap), self.v_max * dt_s)
        self.current += math.copysign(move, gap) if gap else 0.0
        self.velocity = (math.copysign(move, gap) / dt_s) if gap else 0.0
        return self


# ---------------------------------------------------------------------------
# scenarios

SCENARIO_EVENT_KINDS = ("radar_energy", "touch", "user_turn")


@dataclass(frozen=True)
class ScenarioEvent:
    t_s: float
    kind: str
    value: float = 0.0        # radar_energy
    pad_id: str = ""          # touch
    pressed: bool = False     # touch
    text: str = ""            # user_turn


@dataclass(frozen=True)
class Scenario:
    """Timed sensor events replayed into the simulated topics."""

    events: tuple[ScenarioEvent, ...] = ()

    def __post_init__(self):
        last = -1.0
        for ev in self.events:
            if ev.kind not in SCENARIO_EVENT_KINDS:
                raise InvalidScenario(f"unknown event kind: {ev.kind!r}")
            if ev.t_s < last:
                raise InvalidScenario("events must be sorted by t")
            if ev.kind == "radar_energy" and not 0.0 <= ev.value <= 1.0:
                raise InvalidScenario(
                    f"radar energy must be in [0, 1], got {ev.value}")
            if ev.kind == "user_turn" and not ev.text:
                raise InvalidScenario("user_turn requires text")
            last = ev.t_s

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scenario":
        events = []
        for item in data.get("events", []):
            kind = item.get("kind")
            events.append(ScenarioEvent(
                t_s=float(item["t"]), kind=kind,
                value=float(item.get("value", 0.0)),
                pad_id=item.get("pad_id", ""),
                pressed=bool(item.get("pressed", False)),
                text=item.get("text", "")))
        return cls(events=tuple(events))

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidScenario(f"unreadable scenario: {exc}") from exc
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# shared schema definitions

def platform_schemas() -> list[Schema]:
    return [
        Schema("joint_state", 1, (("t_mono", "int"), ("position", "object"),
                                  ("velocity", "object"))),
        Schema("face_state", 1, (("expression", "str"),)),
        Schema("radar_energy", 1, (("energy", "number"),)),
        Schema("touch_contact", 1, (("pad_id", "str"), ("pressed", "bool"))),
        Schema("haptic_state", 1, (("amplitude", "number"),)),
        Schema("set_joint_targets", 1, (("targets", "object"),)),
        Schema("play_timeline", 1, (("timeline", "object"),)),
        Schema("speak", 1, (("text", "str"), ("duration", "number"))),
        Schema("user_turn", 1, (("text", "str"),)),
    ]


@dataclass(frozen=True)
class Rates:
    joints_hz: float = 50.0
    radar_hz: float = 10.0
    feedback_hz: float = 10.0


class SimProvider:
    """Simulated backend. Owns the servos, the expression engine, sensor
    replay, and the tick loop; everything runs on the injected scheduler."""

    PROVIDER_ID = "sim"

    def __init__(self, bus: MessageBus, desc: RobotDescription,
                 scenario: Optional[Scenario] = None,
                 rates: Rates = Rates()):
        self.bus = bus
        self.desc = desc
        self.scenario = scenario or Scenario()
        self.rates = rates
        self.engine = ExpressionEngine(desc)
        rest = desc.rest_pose()
        self.servos = {
            j: ServoSim(current=rest[j], target=rest[j],
                        v_max=desc.joints[j].v_max)
            for j in JointId}
        self.radar_level = 0.0
        self._pubs: dict[str, Publisher] = {}
        self._timers = []
        self._sent_face: Optional[str] = None
        self._sent_haptic: Optional[float] = None
        self._started = False

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "SimProvider":
        if self._started:
            return self
        self._started = True
        bus, pid = self.bus, self.PROVIDER_ID
        bus.register_node(pid)
        for schema in platform_schemas():
            bus.register_schema(schema)
        bus.create_topic("/m/joint_states", "joint_state@1", pid)
        bus.create_topic("/m/face_state", "face_state@1", pid)
        bus.create_topic("/m/radar_energy", "radar_energy@1", pid)
        bus.create_topic("/m/touch_events", "touch_contact@1", pid)
        bus.create_topic("/m/haptic_state", "haptic_state@1", pid)
        bus.create_topic("/m/user_turns", "user_turn@1", pid)
        bus.advertise_service("/m/set_joint_targets", "set_joint_targets@1",
                              self._handle_set_targets, pid)
        bus.advertise_action("/m/play_timeline", "play_timeline@1",
                             self._on_play_goal, policy="multi",
                             provider_id=pid)
        bus.advertise_action("/m/speak", "speak@1", self._on_speak_goal,
                             policy="preempt", provider_id=pid)
        for path in ("/m/joint_states", "/m/face_state", "/m/radar_energy",
                     "/m/touch_events", "/m/haptic_state", "/m/user_turns"):
            self._pubs[path] = bus.create_publisher(path, pid)

        sched = bus.scheduler
        now = bus.clock.now_ns()
        # scenario events are armed before the periodic timers so that an
        # event and a sensor tick at the same instant apply event-first
        for ev in self.scenario.events:
            self._timers.append(sched.call_at(
                now + s_to_ns(ev.t_s), _EventFire(self, ev)))
        self._timers.append(sched.call_every(
            1.0 / self.rates.joints_hz, self._joint_tick, first_at_ns=now))
        self._timers.append(sched.call_every(
            1.0 / self.rates.radar_hz, self._radar_tick, first_at_ns=now))
        return self

    def stop(self) -> None:
        for t in self._timers:
            t.cancel()
        self._timers.clear()

    # -- tick loop -----------------------------------------------------------

    def _joint_tick(self) -> None:
        dt = 1.0 / self.rates.joints_hz
        now = self.bus.clock.now_ns()
        if not self.engine.idle():
            out = self.engine.tick(now, dt)
            for j, target in out.joints.items():
                self.servos[j].target = target
            self._set_face(out.face)
            self._set_haptic(out.haptic)
        elif self._sent_face is None:
            # first tick with no behavior active still announces state
            self._set_face(self.engine.last_face)
            self._set_haptic(self.engine.last_haptic)
        for servo in self.servos.values():
            servo.step(dt)
        state = JointState(
            t_mono=now,
            position={j: self.servos[j].current for j in JointId},
            velocity={j: self.servos[j].velocity for j in JointId})
        self._pubs["/m/joint_states"].publish(state.to_payload())

    def _radar_tick(self) -> None:
        self._pubs["/m/radar_energy"].publish({"energy": self.radar_level})

    def _set_face(self, expression: Optional[str]) -> None:
        if expression is not None and expression != self._sent_face:
            self._sent_face = expression
            self._pubs["/m/face_state"].publish({"expression": expression})

    def _set_haptic(self, amplitude: Optional[float]) -> None:
        if amplitude is not None and amplitude != self._sent_haptic:
            self._sent_haptic = amplitude
            self._pubs["/m/haptic_state"].publish({"amplitude": amplitude})

    def _apply_event(self, ev: ScenarioEvent) -> None:
        if ev.kind == "radar_energy":
            self.radar_level = ev.value
        elif ev.kind == "touch":
            self._pubs["/m/touch_events"].publish(
                {"pad_id": ev.pad_id, "pressed": ev.pressed})
        elif ev.kind == "user_turn":
            self._pubs["/m/user_turns"].publish({"text": ev.text})

    # -- services ----------------------------------------------------------

    def _handle_set_targets(self, request: Mapping) -> dict:
        applied = {}
        for name, value in request["targets"].items():
            jid = JointId(name)
            clamped = self.desc.joints[jid].clamp(float(value))
            self.servos[jid].target = clamped
            applied[name] = clamped
        return {"applied": applied}

    # -- actions -------------------------------------------------------------

    def _on_speak_goal(self, ctx: GoalContext) -> None:
        duration = float(ctx.goal["duration"])
        if duration <= 0:
            raise InvalidDuration(f"utterance duration must be > 0, "
                                  f"got {duration}")
        sched = self.bus.scheduler
        start = self.bus.clock.now_ns()
        duration_ns = s_to_ns(duration)
        timers = []

        def feedback():
            elapsed = self.bus.clock.now_ns() - start
            ctx.publish_feedback(
                {"elapsed_fraction": min(1.0, elapsed / duration_ns)})

        def finish():
            for t in timers:
                t.cancel()
            ctx.succeed({"text": ctx.goal["text"], "duration": duration})

        period = 1.0 / self.rates.feedback_hz
        timers.append(sched.call_every(
            period, feedback, first_at_ns=start + s_to_ns(period)))
        timers.append(sched.call_at(start + duration_ns, finish))

        def on_cancel(_ctx, reason):
            for t in timers:
                t.cancel()
            if reason == "cancel":
                ctx.canceled()
            # preemption terminal status is set by the bus runtime

        ctx.on_cancel = on_cancel

    def _on_play_goal(self, ctx: GoalContext) -> None:
        tl = Timeline.from_dict(ctx.goal["timeline"])
        tl.validate_against(self.desc)  # raises TimelineError on bad targets
        ramp = float(ctx.goal.get("ramp", self.engine.default_ramp_s))
        now = self.bus.clock.now_ns()
        entry = self.engine.start(
            tl, now, ramp_s=ramp,
            current_joints={j: s.current for j, s in self.servos.items()})
        done = self.bus.scheduler.call_at(
            now + s_to_ns(tl.duration),
            lambda: ctx.succeed({"timeline_id": tl.id}))

        def on_cancel(_ctx, reason):
            done.cancel()
            self.engine.stop(entry, self.bus.clock.now_ns())
            if reason == "cancel":
                ctx.canceled()

        ctx.on_cancel = on_cancel


class _EventFire:
    __slots__ = ("provider", "event")

    def __init__(self, provider: SimProvider, event: ScenarioEvent):
        self.provider = provider
        self.event = event

    def __call__(self):
        self.provider._apply_event(self.event)


# ---------------------------------------------------------------------------
# hardware stub

class HardwareStubProvider:
    """Registers the exact interface set of a physical backend while moving
    nothing. Exists so interface parity is a first-class executable test and
    behavior code can be pointed at either backend unchanged."""

    PROVIDER_ID = "hardware-stub"

    def __init__(self, bus: MessageBus, desc: RobotDescription):
        self.bus = bus
        self.desc = desc
        self._started = False

    def start(self) -> "HardwareStubProvider":
        if self._started:
            return self
        self._started = True
        bus, pid = self.bus, self.PROVIDER_ID
        bus.register_node(pid)
        for schema in platform_schemas():
            bus.register_schema(schema)
        bus.create_topic("/m/joint_states", "joint_state@1", pid)
        bus.create_topic("/m/face_state", "face_state@1", pid)
        bus.create_topic("/m/radar_energy", "radar_energy@1", pid)
        bus.create_topic("/m/touch_events", "touch_contact@1", pid)
        bus.create_topic("/m/haptic_state", "haptic_state@1", pid)
        bus.create_topic("/m/user_turns", "user_turn@1", pid)
        bus.advertise_service("/m/set_joint_targets", "set_joint_targets@1",
                              self._handle_set_targets, pid)
        bus.advertise_action("/m/play_timeline", "play_timeline@1",
                             self._succeed_immediately, policy="multi",
                             provider_id=pid)
        bus.advertise_action("/m/speak", "speak@1", self._succeed_immediately,
                             policy="preempt", provider_id=pid)
        return self

    def stop(self) -> None:
        pass

    def _handle_set_targets(self, request: Mapping) -> dict:
        applied = {name: self.desc.joints[JointId(name)].clamp(float(value))
                   for name, value in request["targets"].items()}
        return {"applied": applied}

    def _succeed_immediately(self, ctx: GoalContext) -> None:
        ctx.succeed({})


def run(bus: MessageBus, desc: RobotDescription,
        scenario: Optional[Scenario] = None,
        rates: Rates = Rates()) -> SimProvider:
    """Start a simulated backend on the given bus and return it."""
    return SimProvider(bus, desc, scenario=scenario, rates=rates).start()
