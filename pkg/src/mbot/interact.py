"""Interaction templates: one-way storytelling and two-way coaching.

Storytelling walks a script of narration chunks through a small state
machine, coordinating the speech action with cue-scheduled gesture
timelines. Coaching tracks a five-day structured session: a turn manager
appends user turns, a phase tracker walks greeting -> practice ->
follow_up -> closing, and a pluggable generator produces conversational
acts (utterance + face + gesture) that a delivery step executes through
the same speech and timeline interfaces the simulator and hardware share.

Both coordinators are event-driven: they advance on action completion
callbacks and timers, never by blocking, so they run identically under
real and virtual clocks.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import requests

from .bus import (ActionHandle, Envelope, GoalContext, GoalStatus, MessageBus,
                  Schema)
from .clock import s_to_ns
from .errors import MError
from .expression import (CUE_GRACE_S, CueSchedule, Keyframe, Timeline, Track,
                         schedule_cues)
from .model import RobotDescription

log = logging.getLogger(__name__)


class InteractError(MError):
    pass


class InvalidScript(InteractError):
    pass


class SpeakFailed(InteractError):
    pass


class SessionClosed(InteractError):
    pass


class InvalidTurn(InteractError, ValueError):
    pass


class UnknownGesture(InteractError):
    pass


class GeneratorUnavailable(InteractError):
    pass


class SessionLockHeld(InteractError):
    pass


# ---------------------------------------------------------------------------
# session lock

SESSION_LOCK_PATH = "/interact/session_lock"

_SESSION_LOCK_SCHEMA = Schema(
    "session_lock", 1, (("op", "str"), ("owner", "str")))


class SessionLockService:
    """Mutual exclusion for interactions: two templates never run
    concurrently against one robot. Registered once per bus; runners
    acquire on start and release on their terminal state."""

    def __init__(self, bus: MessageBus):
        self.bus = bus
        self._owner: Optional[str] = None
        self._lock = threading.Lock()
        bus.register_schema(_SESSION_LOCK_SCHEMA)
        bus.advertise_service(SESSION_LOCK_PATH, "session_lock@1",
                              self._handle, provider_id="interact")

    def _handle(self, req: Mapping) -> dict:
        op, owner = req["op"], req["owner"]
        with self._lock:
            if op == "acquire":
                if self._owner is None or self._owner == owner:
                    self._owner = owner
                    return {"granted": True, "owner": owner}
                return {"granted": False, "owner": self._owner}
            if op == "release":
                if self._owner == owner:
                    self._owner = None
                return {"granted": True, "owner": self._owner or ""}
            raise ValueError(f"unknown lock op: {op!r}")


def ensure_session_lock(bus: MessageBus) -> None:
    if SESSION_LOCK_PATH not in bus.interface_stats():
        SessionLockService(bus)


def acquire_session_lock(bus: MessageBus, owner: str) -> None:
    ensure_session_lock(bus)
    reply = bus.call(SESSION_LOCK_PATH, {"op": "acquire", "owner": owner})
    if not reply["granted"]:
        raise SessionLockHeld(
            f"another interaction holds the session lock: {reply['owner']}")


def release_session_lock(bus: MessageBus, owner: str) -> None:
    bus.call(SESSION_LOCK_PATH, {"op": "release", "owner": owner})


# ---------------------------------------------------------------------------
# gesture/face library

class TimelineLibrary:
    """Named gesture timelines plus the robot description they are
    validated against. Loaded from a manifest mapping names to files."""

    def __init__(self, desc: RobotDescription,
                 timelines: Mapping[str, Timeline]):
        self.desc = desc
        self._timelines = dict(timelines)
        for tl in self._timelines.values():
            tl.validate_against(desc)

    def __contains__(self, timeline_id: str) -> bool:
        return timeline_id in self._timelines

    def get(self, timeline_id: str) -> Timeline:
        try:
            return self._timelines[timeline_id]
        except KeyError:
            raise UnknownGesture(f"gesture not in library: {timeline_id!r}")

    def names(self) -> list[str]:
        return sorted(self._timelines)

    @classmethod
    def load(cls, manifest_path: Path, desc: RobotDescription) -> "TimelineLibrary":
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        base = manifest_path.parent
        timelines = {name: Timeline.load(str(base / rel))
                     for name, rel in manifest["gestures"].items()}
        return cls(desc, timelines)

    @classmethod
    def bundled(cls, desc: RobotDescription) -> "TimelineLibrary":
        root = resources.files("mbot.assets").joinpath("gestures")
        manifest = json.loads(
            root.joinpath("manifest.json").read_text(encoding="utf-8"))
        timelines = {
            name: Timeline.from_dict(json.loads(
                root.joinpath(rel).read_text(encoding="utf-8")))
            for name, rel in manifest["gestures"].items()}
        return cls(desc, timelines)


def face_timeline(expression: str, hold_s: float = 0.5,
                  priority: int = 5) -> Timeline:
    """Minimal timeline that switches the face and expires."""
    track = Track(kind="face",
                  keyframes=(Keyframe(t=0.0, targets=expression, easing="hold"),))
    return Timeline(f"face_{expression}", [track], duration=hold_s,
                    priority=priority)


# ---------------------------------------------------------------------------
# story scripts

@dataclass(frozen=True)
class StoryChunk:
    text: str
    duration_s: float
    cues: CueSchedule


@dataclass(frozen=True)
class StoryScript:
    id: str
    chunks: tuple[StoryChunk, ...]

    def validate(self, library: Optional[TimelineLibrary] = None) -> None:
        if not self.chunks:
            raise InvalidScript("script needs at least one chunk")
        for i, chunk in enumerate(self.chunks):
            if not chunk.text:
                raise InvalidScript(f"chunk {i} has empty narration")
            if chunk.duration_s <= 0:
                raise InvalidScript(f"chunk {i} duration must be positive")
            try:
                chunk.cues.validate_for(chunk.duration_s, CUE_GRACE_S)
            except Exception as exc:
                raise InvalidScript(f"chunk {i}: {exc}") from exc
            if library is not None:
                for cue in chunk.cues.cues:
                    if cue.timeline_id not in library:
                        raise InvalidScript(
                            f"chunk {i} cue references unknown gesture "
                            f"{cue.timeline_id!r}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "StoryScript":
        chunks = tuple(
            StoryChunk(text=c["text"], duration_s=float(c["duration"]),
                       cues=CueSchedule.from_list(c.get("cues", [])))
            for c in data["chunks"])
        return cls(id=data["id"], chunks=chunks)

    @classmethod
    def load(cls, path: str) -> "StoryScript":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidScript(f"unreadable script: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def bundled_sample(cls) -> "StoryScript":
        text = resources.files("mbot.assets").joinpath("story_winter.json") \
            .read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# story state machine (pure)

IDLE = "idle"
NARRATING = "narrating"
PAUSED = "paused"
COMPLETE = "complete"
ABORTED = "aborted"


@dataclass(frozen=True)
class StoryPhase:
    name: str
    chunk: int = -1

    def label(self) -> str:
        if self.name in (NARRATING, PAUSED):
            return f"{self.name}({self.chunk})"
        return self.name


class StoryStateMachine:
    """Transition core for story progression, isolated from the bus so the
    whole relation can be model-checked by enumeration.

    Events: start, chunk_done, pause, resume, abort. Events with no legal
    transition from the current state are ignored (state unchanged); the
    terminal states absorb everything.
    """

    EVENTS = ("start", "chunk_done", "pause", "resume", "abort")

    def __init__(self, n_chunks: int):
        if n_chunks < 1:
            raise InvalidScript("story needs at least one chunk")
        self.n_chunks = n_chunks
        self.state = StoryPhase(IDLE)
        self.transitions: list[tuple[StoryPhase, str, StoryPhase]] = []

    def apply(self, event: str) -> bool:
        """Apply an event; True if the state changed."""
        new = self._next(self.state, event)
        if new is None:
            return False
        self.transitions.append((self.state, event, new))
        self.state = new
        return True

    def _next(self, state: StoryPhase, event: str) -> Optional[StoryPhase]:
        if state.name in (COMPLETE, ABORTED):
            return None
        if state.name == IDLE:
            return StoryPhase(NARRATING, 0) if event == "start" else None
        if state.name == NARRATING:
            if event == "chunk_done":
                nxt = state.chunk + 1
                return (StoryPhase(COMPLETE) if nxt >= self.n_chunks
                        else StoryPhase(NARRATING, nxt))
            if event == "pause":
                return StoryPhase(PAUSED, state.chunk)
            if event == "abort":
                return StoryPhase(ABORTED)
            return None
        if state.name == PAUSED:
            if event == "resume":
                return StoryPhase(NARRATING, state.chunk)
            if event == "abort":
                return StoryPhase(ABORTED)
            return None
        return None


# ---------------------------------------------------------------------------
# story runner

class StoryRunner:
    """Drives a story over the bus: one speech action per chunk with its
    cue group scheduled against the utterance start."""

    def __init__(self, bus: MessageBus, script: StoryScript,
                 library: TimelineLibrary,
                 on_feedback: Optional[Callable[[int], None]] = None):
        script.validate(library)
        self.bus = bus
        self.script = script
        self.library = library
        self.machine = StoryStateMachine(len(script.chunks))
        self.on_feedback = on_feedback
        self.dispatch_log: list[tuple[int, str]] = []  # (t_mono, timeline_id)
        self.abort_cause: Optional[str] = None
        self._speak_handle: Optional[ActionHandle] = None
        self._cue_group = None
        self._expect_speak_stop = False
        self._done_cbs: list[Callable[[StoryPhase], None]] = []

    # -- lifecycle -----------------------------------------------------------

    @property
    def state(self) -> StoryPhase:
        return self.machine.state

    @property
    def finished(self) -> bool:
        return self.state.name in (COMPLETE, ABORTED)

    def on_done(self, cb: Callable[[StoryPhase], None]) -> None:
        self._done_cbs.append(cb)

    def start(self) -> None:
        if self.state.name != IDLE:
            return
        acquire_session_lock(self.bus, f"story:{self.script.id}")
        if self.machine.apply("start"):
            self._begin_chunk(self.state.chunk)

    def pause(self) -> None:
        if self.state.name != NARRATING:
            return
        self._stop_current_chunk()
        self.machine.apply("pause")

    def resume(self) -> None:
        if self.machine.apply("resume"):
            # the interrupted chunk restarts from its beginning
            self._begin_chunk(self.state.chunk)

    def abort(self, cause: str = "operator abort") -> None:
        if self.finished or self.state.name == IDLE:
            return
        self._stop_current_chunk()
        self.abort_cause = cause
        self.machine.apply("abort")
        self._fire_done()

    # -- internals ---------------------------------------------------------

    def _begin_chunk(self, index: int) -> None:
        chunk = self.script.chunks[index]
        if self.on_feedback is not None:
            self.on_feedback(index)
        start_ns = self.bus.clock.now_ns()
        self._cue_group = schedule_cues(
            chunk.cues, start_ns, self._dispatch_cue, self.bus.scheduler)
        self._expect_speak_stop = False
        handle = self.bus.send_goal(
            "/m/speak", {"text": chunk.text, "duration": chunk.duration_s})
        self._speak_handle = handle
        handle.on_done(self._on_speak_done)

    def _dispatch_cue(self, timeline_id: str) -> None:
        self.dispatch_log.append((self.bus.clock.now_ns(), timeline_id))
        tl = self.library.get(timeline_id)
        self.bus.send_goal("/m/play_timeline", {"timeline": tl.to_dict()})

    def _stop_current_chunk(self) -> None:
        if self._cue_group is not None:
            self._cue_group.cancel()
            self._cue_group = None
        if self._speak_handle is not None and not self._speak_handle.done:
            self._expect_speak_stop = True
            self.bus.cancel_goal(self._speak_handle)
        self._speak_handle = None

    def _on_speak_done(self, handle: ActionHandle) -> None:
        if self._expect_speak_stop or handle is not self._speak_handle:
            return
        if handle.status == GoalStatus.SUCCEEDED:
            self.machine.apply("chunk_done")
            if self.state.name == NARRATING:
                self._begin_chunk(self.state.chunk)
            elif self.state.name == COMPLETE:
                self._fire_done()
        elif self.state.name == NARRATING:
            # the backend refused or dropped the utterance
            self.abort_cause = (
                f"speak failed: {handle.status.value}"
                + (f" ({handle.error})" if handle.error else ""))
            if self._cue_group is not None:
                self._cue_group.cancel()
            self.machine.apply("abort")
            self._fire_done()

    def _fire_done(self) -> None:
        release_session_lock(self.bus, f"story:{self.script.id}")
        for cb in self._done_cbs:
            try:
                cb(self.state)
            except Exception:
                log.exception("story done callback failed")


_RUN_STORY_SCHEMA = Schema("run_story", 1, (("script", "object"),))


def advertise_story_action(bus: MessageBus, library: TimelineLibrary,
                           path: str = "/interact/run_story") -> None:
    """Expose story delivery as a bus action: feedback carries the chunk
    index, the result carries the final state, cancellation aborts. One
    story at a time (a second goal gets ServerBusy)."""
    bus.register_schema(_RUN_STORY_SCHEMA)

    def on_goal(ctx: GoalContext) -> None:
        script = StoryScript.from_dict(ctx.goal["script"])
        runner = StoryRunner(
            bus, script, library,
            on_feedback=lambda i: ctx.publish_feedback({"chunk_index": i}))

        def on_done(state: StoryPhase) -> None:
            if state.name == COMPLETE:
                ctx.succeed({"state": state.label()})
            elif ctx.cancel_requested:
                ctx.canceled()
            else:
                ctx.abort(runner.abort_cause or state.label())

        runner.on_done(on_done)

        def on_cancel(c: GoalContext, reason: str) -> None:
            runner.abort("goal canceled")

        ctx.on_cancel = on_cancel
        runner.start()

    bus.advertise_action(path, "run_story@1", on_goal, policy="reject",
                         provider_id="interact")


def run_story(bus: MessageBus, script: StoryScript, library: TimelineLibrary,
              limit_s: float = 600.0,
              on_feedback: Optional[Callable[[int], None]] = None) -> StoryRunner:
    """Run a story to a terminal state. Blocking convenience wrapper: pumps
    the scheduler under a virtual clock, waits on it otherwise. Must not be
    called from inside a scheduler callback."""
    runner = StoryRunner(bus, script, library, on_feedback=on_feedback)
    done = threading.Event()
    runner.on_done(lambda _st: done.set())
    runner.start()
    if bus.clock.is_virtual:
        bus.scheduler.run_until(lambda: runner.finished, limit_s=limit_s)
    elif not runner.finished and not done.wait(timeout=limit_s):
        raise TimeoutError(f"story did not finish within {limit_s}s")
    return runner


# ---------------------------------------------------------------------------
# coaching sessions

PHASES = ("greeting", "practice", "follow_up", "closing")


@dataclass(frozen=True)
class Turn:
    speaker: str  # user | robot
    text: str
    t_mono: int


@dataclass(frozen=True)
class PhasePolicy:
    """Data-encoded phase advancement rules."""

    practice_user_turns: int = 2
    follow_up_user_turns: int = 2


@dataclass
class SessionState:
    session_id: str
    day: int
    phase: str = "greeting"
    history: list[Turn] = field(default_factory=list)
    phase_trace: list[str] = field(default_factory=list)
    progress: dict[int, bool] = field(default_factory=dict)
    open: bool = True
    _phase_user_turns: dict[str, int] = field(
        default_factory=lambda: {p: 0 for p in PHASES})

    def __post_init__(self):
        if not 1 <= self.day <= 5:
            raise InteractError(f"day must be in 1..5, got {self.day}")

    def _advance(self, new_phase: str) -> None:
        assert PHASES.index(new_phase) == PHASES.index(self.phase) + 1
        self.phase = new_phase

    def view(self) -> dict:
        """Serializable snapshot for generators and traces."""
        return {
            "session_id": self.session_id,
            "day": self.day,
            "phase": self.phase,
            "history": [{"speaker": t.speaker, "text": t.text,
                         "t_mono": t.t_mono} for t in self.history],
        }


def ingest_turn(state: SessionState, text: str, t_mono: int,
                policy: PhasePolicy = PhasePolicy()) -> str:
    """Append a user turn and advance the phase per policy.

    Returns the phase the turn was ingested in (before any advancement),
    which is what the session trace records.
    """
    if not state.open:
        raise SessionClosed(f"session {state.session_id} is closed")
    if not text or not text.strip():
        raise InvalidTurn("empty user turn rejected")
    snapshot = state.phase
    state.history.append(Turn("user", text, t_mono))
    state.phase_trace.append(snapshot)
    state._phase_user_turns[snapshot] += 1
    if (state.phase == "practice"
            and state._phase_user_turns["practice"] >= policy.practice_user_turns):
        state._advance("follow_up")
    elif (state.phase == "follow_up"
          and state._phase_user_turns["follow_up"] >= policy.follow_up_user_turns):
        state._advance("closing")
    return snapshot


def record_robot_act(state: SessionState, utterance: str, t_mono: int) -> None:
    """Append the robot's turn; the greeting phase ends after the robot's
    first act."""
    if not state.open:
        raise SessionClosed(f"session {state.session_id} is closed")
    state.history.append(Turn("robot", utterance, t_mono))
    if state.phase == "greeting":
        state._advance("practice")


# ---------------------------------------------------------------------------
# response generation

@dataclass(frozen=True)
class ConversationalAct:
    utterance: str
    estimated_duration_s: float
    face: str
    gesture: str

    def __post_init__(self):
        if not self.utterance:
            raise InteractError("act utterance must be non-empty")


def estimate_duration(utterance: str) -> float:
    # deterministic stand-in for TTS timing
    return max(1.0, round(0.06 * len(utterance), 3))


class MockGenerator:
    """Deterministic phase-keyed templates referencing the latest user turn.
    Same session state always yields the same act, and every gesture comes
    from the loaded library."""

    TEMPLATES = {
        "greeting": ("Hello! It's day {day}. I'd love to hear about something "
                     "good that happened to you today.", "joy"),
        "practice": ("Thank you for sharing. You said \"{last}\". What made "
                     "that moment feel good?", "wonder"),
        "follow_up": ("That sounds meaningful. How could you make "
                      "\"{last}\" part of tomorrow too?", "thinking"),
        "closing": ("You did great work today. Day {day} is complete. "
                    "See you tomorrow!", "calm"),
    }

    PHASE_GESTURES = {
        "greeting": ("wave", "nod"),
        "practice": ("tilt_wonder", "nod"),
        "follow_up": ("nod", "tilt_wonder"),
        "closing": ("calm_sway", "wave"),
    }

    def __init__(self, library: TimelineLibrary):
        self.library = library
        for names in self.PHASE_GESTURES.values():
            for name in names:
                library.get(name)  # fail loud if the library lacks one

    def generate(self, state: SessionState) -> ConversationalAct:
        template, face = self.TEMPLATES[state.phase]
        last = next((t.text for t in reversed(state.history)
                     if t.speaker == "user"), "")
        utterance = template.format(day=state.day, last=last)
        options = self.PHASE_GESTURES[state.phase]
        gesture = options[len(state.history) % len(options)]
        return ConversationalAct(
            utterance=utterance,
            estimated_duration_s=estimate_duration(utterance),
            face=face, gesture=gesture)


class HttpGenerator:
    """Client for an external response service.

    Contract: POST the session view as JSON, receive an act as JSON with
    keys utterance, face, gesture, and optionally estimated_duration.
    """

    def __init__(self, url: str, timeout_s: float = 10.0):
        self.url = url
        self.timeout_s = timeout_s

    def generate(self, state: SessionState) -> ConversationalAct:
        try:
            resp = requests.post(self.url, json=state.view(),
                                 timeout=self.timeout_s)
            resp.raise_for_status()
            data = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise GeneratorUnavailable(f"generator at {self.url}: {exc}") from exc
        try:
            return ConversationalAct(
                utterance=data["utterance"],
                estimated_duration_s=float(
                    data.get("estimated_duration",
                             estimate_duration(data["utterance"]))),
                face=data["face"], gesture=data["gesture"])
        except KeyError as exc:
            raise GeneratorUnavailable(
                f"generator reply missing field {exc}") from exc


# ---------------------------------------------------------------------------
# delivery

def validate_act(act: ConversationalAct, library: TimelineLibrary) -> None:
    if act.gesture not in library:
        raise UnknownGesture(f"gesture not in library: {act.gesture!r}")
    if act.face not in library.desc.display.expressions:
        raise InteractError(f"unknown face expression: {act.face!r}")


def deliver_async(bus: MessageBus, act: ConversationalAct,
                  library: TimelineLibrary,
                  then: Callable[[ActionHandle], None]) -> ActionHandle:
    """Start speech, gesture, and face together; `then` fires when the
    speech action reaches its terminal status (the gesture may outlast it)."""
    validate_act(act, library)
    bus.send_goal("/m/play_timeline",
                  {"timeline": face_timeline(act.face).to_dict()})
    gesture = library.get(act.gesture)
    bus.send_goal("/m/play_timeline", {"timeline": gesture.to_dict()})
    handle = bus.send_goal(
        "/m/speak", {"text": act.utterance,
                     "duration": act.estimated_duration_s})
    handle.on_done(then)
    return handle


def deliver(bus: MessageBus, act: ConversationalAct,
            library: TimelineLibrary, limit_s: float = 120.0) -> ActionHandle:
    """Blocking delivery; returns once speech terminates. Raises SpeakFailed
    if the backend did not complete the utterance. Must not be called from
    inside a scheduler callback."""
    box: list[ActionHandle] = []
    handle = deliver_async(bus, act, library, box.append)
    if bus.clock.is_virtual:
        bus.scheduler.run_until(lambda: bool(box), limit_s=limit_s)
    else:
        handle.wait(timeout_s=limit_s)
    if handle.status != GoalStatus.SUCCEEDED:
        raise SpeakFailed(f"speak ended {handle.status.value}")
    return handle


# ---------------------------------------------------------------------------
# coach runner

class CoachRunner:
    """One coaching session: user turns in, conversational acts out.

    Sessions are user-initiated: the robot's greeting answers the first
    user turn and ends the greeting phase. The session completes after the
    robot responds to a turn that arrived in the closing phase. Scripted
    turns (for tests and demos) are injected a fixed gap after each robot
    response; live turns arrive on the user-turn topic either way.
    """

    def __init__(self, bus: MessageBus, library: TimelineLibrary,
                 day: int, generator=None,
                 scripted_turns: Optional[Sequence[str]] = None,
                 policy: PhasePolicy = PhasePolicy(),
                 session_id: Optional[str] = None,
                 turn_gap_s: float = 0.5):
        self.bus = bus
        self.library = library
        self.generator = generator or MockGenerator(library)
        self.policy = policy
        self.state = SessionState(
            session_id=session_id or f"coach-day{day}", day=day)
        self.scripted_turns = list(scripted_turns or [])
        self._next_turn = 0
        self.turn_gap_s = turn_gap_s
        self.complete = False
        self.failure: Optional[str] = None
        self._sub = None
        self._turn_pub = None
        self._awaiting_reply = False

    def start(self) -> "CoachRunner":
        acquire_session_lock(self.bus, f"coach:{self.state.session_id}")
        self._sub = self.bus.subscribe("/m/user_turns", self._on_turn)
        if self.scripted_turns:
            self._turn_pub = self.bus.create_publisher("/m/user_turns",
                                                       "coach-script")
            self._schedule_next_turn()
        return self

    @property
    def finished(self) -> bool:
        return self.complete or self.failure is not None

    def _schedule_next_turn(self) -> None:
        if self._next_turn >= len(self.scripted_turns):
            return
        text = self.scripted_turns[self._next_turn]
        self._next_turn += 1
        self.bus.scheduler.call_later(
            self.turn_gap_s, lambda: self._turn_pub.publish({"text": text}))

    def _on_turn(self, env: Envelope) -> None:
        if self.finished or self._awaiting_reply:
            return
        try:
            snapshot = ingest_turn(self.state, env.payload["text"],
                                   env.t_mono, self.policy)
        except InvalidTurn:
            log.warning("ignoring invalid user turn")
            return
        act = self.generator.generate(self.state)
        self._awaiting_reply = True
        deliver_async(self.bus, act, self.library,
                      lambda h: self._on_delivered(h, act, snapshot))

    def _on_delivered(self, handle: ActionHandle, act: ConversationalAct,
                      snapshot: str) -> None:
        self._awaiting_reply = False
        if handle.status != GoalStatus.SUCCEEDED:
            self.failure = f"speak ended {handle.status.value}"
            self._close()
            return
        record_robot_act(self.state, act.utterance, self.bus.clock.now_ns())
        if snapshot == "closing":
            self.state.progress[self.state.day] = True
            self.complete = True
            self._close()
            return
        self._schedule_next_turn()

    def _close(self) -> None:
        self.state.open = False
        if self._sub is not None:
            self._sub.close()
            self._sub = None
        release_session_lock(self.bus, f"coach:{self.state.session_id}")

    def trace(self) -> dict:
        """Deterministic session trace for reproducibility checks."""
        return {
            "session_id": self.state.session_id,
            "day": self.state.day,
            "complete": self.complete,
            "phases": list(self.state.phase_trace),
            "final_phase": self.state.phase,
            "history": [{"speaker": t.speaker, "text": t.text,
                         "t_mono": t.t_mono} for t in self.state.history],
        }


def run_coach_day(bus: MessageBus, library: TimelineLibrary, day: int,
                  scripted_turns: Sequence[str], generator=None,
                  policy: PhasePolicy = PhasePolicy(),
                  limit_s: float = 600.0) -> CoachRunner:
    """Run one scripted day to completion under a virtual clock."""
    runner = CoachRunner(bus, library, day, generator=generator,
                         scripted_turns=scripted_turns, policy=policy)
    runner.start()
    bus.scheduler.run_until(lambda: runner.finished, limit_s=limit_s)
    return runner


def load_turns_file(path: str) -> dict[int, list[str]]:
    """Scripted turns by day: {"days": {"1": [...], ...}}."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return {int(day): list(turns) for day, turns in data["days"].items()}


def bundled_turns() -> dict[int, list[str]]:
    text = resources.files("mbot.assets").joinpath("coach_turns.json") \
        .read_text(encoding="utf-8")
    data = json.loads(text)
    return {int(day): list(turns) for day, turns in data["days"].items()}
