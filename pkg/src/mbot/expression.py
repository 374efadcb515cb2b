"""Timeline-based expressive behavior: keyframe tracks, sampling, blending,
preemption ramps, audio-relative cue scheduling.

A timeline holds joint, face, and haptic tracks of keyframes. Joint and
haptic keyframes interpolate (linear, smoothstep, or hold); face keyframes
switch discretely because expressions are named states, not continuous
values. Out-of-limit joint targets are rejected when a timeline is built,
never silently clamped at runtime: authored behaviors must be valid by
construction.

Blending is priority-override with ramps: per joint, the highest-priority
active timeline wins; equal priorities resolve to the most recently
started. Preemption fades the losing timelines out over a ramp so the
commanded output stays continuous.
"""

from __future__ import annotations

import bisect
import json
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .clock import Scheduler, s_to_ns
from .errors import InvalidDuration, MError
from .model import JointId, RobotDescription


class TimelineError(MError):
    pass


class EmptyTimeline(TimelineError):
    pass


EASINGS = ("linear", "smoothstep", "hold")

DEFAULT_RAMP_S = 0.25
CUE_GRACE_S = 0.5


def ease(kind: str, u: float) -> float:
    """Progress curve on u in [0, 1]."""
    if kind == "linear":
        return u
    if kind == "smoothstep":
        return u * u * (3.0 - 2.0 * u)
    if kind == "hold":
        return 0.0 if u < 1.0 else 1.0
    raise TimelineError(f"unknown easing: {kind}")


@dataclass(frozen=True)
class Keyframe:
    """One target on a track. `targets` holds JointId -> radians for joint
    tracks, an expression name for face tracks, and an amplitude in [0, 1]
    for haptic tracks."""

    t: float
    targets: object
    easing: str = "linear"

    def __post_init__(self):
        if self.t < 0:
            raise TimelineError(f"keyframe time must be >= 0, got {self.t}")
        if self.easing not in EASINGS:
            raise TimelineError(f"unknown easing: {self.easing}")


@dataclass(frozen=True)
class Track:
    kind: str  # joint | face | haptic
    keyframes: tuple[Keyframe, ...]

    def __post_init__(self):
        if self.kind not in ("joint", "face", "haptic"):
            raise TimelineError(f"unknown track kind: {self.kind}")
        times = [k.t for k in self.keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TimelineError("track keyframes must strictly increase in t")
        for kf in self.keyframes:
            if self.kind == "joint":
                if not isinstance(kf.targets, Mapping) or not kf.targets:
                    raise TimelineError("joint keyframe targets must be a "
                                        "non-empty JointId map")
            elif self.kind == "face":
                if not isinstance(kf.targets, str):
                    raise TimelineError("face keyframe target must be an "
                                        "expression name")
            else:
                amp = kf.targets
                if not isinstance(amp, (int, float)) or not 0.0 <= amp <= 1.0:
                    raise TimelineError(
                        f"haptic amplitude must be in [0, 1], got {amp!r}")


class _Channel:
    """Per-value interpolation lane built from one track's keyframes."""

    def __init__(self, points: Sequence[tuple[float, float, str]]):
        self.times = [p[0] for p in points]
        self.values = [p[1] for p in points]
        self.easings = [p[2] for p in points]

    def sample(self, t: float) -> float:
        if t <= self.times[0]:
            return self.values[0]
        if t >= self.times[-1]:
            return self.values[-1]
        i = bisect.bisect_right(self.times, t)
        t0, t1 = self.times[i - 1], self.times[i]
        v0, v1 = self.values[i - 1], self.values[i]
        u = (t - t0) / (t1 - t0)
        # the later keyframe's easing shapes the segment leading into it
        return v0 + (v1 - v0) * ease(self.easings[i], u)


class Timeline:
    """Immutable parameterized behavior. `duration` covers every keyframe;
    sampling past the end clamps to the final targets."""

    def __init__(self, timeline_id: str, tracks: Sequence[Track],
                 duration: float, priority: int = 0):
        self.id = timeline_id
        self.tracks = tuple(tracks)
        self.duration = float(duration)
        self.priority = int(priority)
        if self.duration < 0:
            raise TimelineError("duration must be >= 0")
        max_t = max((k.t for tr in self.tracks for k in tr.keyframes),
                    default=None)
        if max_t is not None and self.duration < max_t:
            raise TimelineError(
                f"duration {self.duration} < last keyframe t {max_t}")
        self._joint_channels: dict[JointId, _Channel] = {}
        self._face_channel: Optional[_Channel] = None
        self._face_points: list[tuple[float, str]] = []
        self._haptic_channel: Optional[_Channel] = None
        self._build_channels()

    def _build_channels(self) -> None:
        joint_points: dict[JointId, list[tuple[float, float, str]]] = {}
        for tr in self.tracks:
            if tr.kind == "joint":
                for kf in tr.keyframes:
                    for joint, value in kf.targets.items():
                        jid = JointId(joint)
                        joint_points.setdefault(jid, []).append(
                            (kf.t, float(value), kf.easing))
            elif tr.kind == "face":
                for kf in tr.keyframes:
                    self._face_points.append((kf.t, kf.targets))
            else:
                pts = [(kf.t, float(kf.targets), kf.easing)
                       for kf in tr.keyframes]
                if pts:
                    self._haptic_channel = _Channel(pts)
        for jid, pts in joint_points.items():
            pts.sort(key=lambda p: p[0])
            times = [p[0] for p in pts]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise TimelineError(
                    f"joint {jid.value} has duplicate keyframe times")
            self._joint_channels[jid] = _Channel(pts)
        self._face_points.sort(key=lambda p: p[0])

    @property
    def joints(self) -> frozenset[JointId]:
        return frozenset(self._joint_channels)

    @property
    def has_face(self) -> bool:
        return bool(self._face_points)

    @property
    def has_haptic(self) -> bool:
        return self._haptic_channel is not None

    def is_empty(self) -> bool:
        return not (self._joint_channels or self._face_points
                    or self._haptic_channel)

    def validate_against(self, desc: RobotDescription) -> None:
        """Reject out-of-limit joint targets. Construction-time gate."""
        for jid, chan in self._joint_channels.items():
            lim = desc.joints[jid]
            for v in chan.values:
                if not lim.min_rad <= v <= lim.max_rad:
                    raise TimelineError(
                        f"timeline {self.id!r}: {jid.value} target {v} outside "
                        f"[{lim.min_rad}, {lim.max_rad}]")
        if self.has_face:
            known = set(desc.display.expressions)
            for _, name in self._face_points:
                if name not in known:
                    raise TimelineError(
                        f"timeline {self.id!r}: unknown expression {name!r}")

    # -- sampling ----------------------------------------------------------

    def sample(self, t: float) -> "TrackSample":
        """Track outputs at local time t (clamped into [0, duration])."""
        if self.is_empty():
            raise EmptyTimeline(f"timeline {self.id!r} has no keyframes")
        if t < 0:
            raise TimelineError("sample time must be >= 0")
        joints = {jid: chan.sample(t)
                  for jid, chan in self._joint_channels.items()}
        face = None
        if self._face_points:
            face = self._face_points[0][1]
            for kt, name in self._face_points:
                if kt <= t:
                    face = name
                else:
                    break
        haptic = (self._haptic_channel.sample(t)
                  if self._haptic_channel is not None else None)
        return TrackSample(joints=joints, face=face, haptic=haptic)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        tracks = []
        for tr in self.tracks:
            kfs = []
            for kf in tr.keyframes:
                if tr.kind == "joint":
                    targets = {j if isinstance(j, str) else j.value: v
                               for j, v in kf.targets.items()}
                else:
                    targets = kf.targets
                kfs.append({"t": kf.t, "targets": targets, "easing": kf.easing})
            tracks.append({"kind": tr.kind, "keyframes": kfs})
        return {"id": self.id, "priority": self.priority,
                "duration": self.duration, "tracks": tracks}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Timeline":
        tracks = []
        for tr in data["tracks"]:
            kfs = tuple(
                Keyframe(t=kf["t"], targets=kf["targets"],
                         easing=kf.get("easing", "linear"))
                for kf in tr["keyframes"])
            tracks.append(Track(kind=tr["kind"], keyframes=kfs))
        return cls(data["id"], tracks, data["duration"],
                   priority=data.get("priority", 0))

    @classmethod
    def load(cls, path: str) -> "Timeline":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TrackSample:
    joints: dict[JointId, float]
    face: Optional[str]
    haptic: Optional[float]


# ---------------------------------------------------------------------------
# active set and blending

@dataclass
class _Entry:
    timeline: Timeline
    start_ns: int
    order: int                      # insertion tiebreak
    ramping_out: bool = False
    ramp_start_ns: int = 0
    ramp_end_ns: int = 0

    def local_t(self, now_ns: int) -> float:
        return (now_ns - self.start_ns) / 1e9

    def finished(self, now_ns: int) -> bool:
        past_end = self.local_t(now_ns) > self.timeline.duration
        if self.ramping_out:
            return now_ns >= self.ramp_end_ns or past_end
        return past_end


class ActiveSet:
    """Running timelines plus the ramp state left behind by preemptions.

    `blend()` is the pure output rule; `ExpressionEngine` below wraps it
    with hold-state and a slew limiter for ticked execution.
    """

    def __init__(self):
        self.entries: list[_Entry] = []
        self._order = 0

    def running(self) -> list[_Entry]:
        return [e for e in self.entries if not e.ramping_out]

    def start(self, tl: Timeline, now_ns: int, ramp_s: float = DEFAULT_RAMP_S) -> _Entry:
        """Admit a timeline, ramping out conflicting lower-or-equal-priority
        timelines over `ramp_s`."""
        if ramp_s < 0:
            raise TimelineError("ramp must be >= 0")
        ramp_ns = s_to_ns(ramp_s)
        for entry in self.running():
            if entry.timeline.priority > tl.priority:
                continue
            conflict = bool(entry.timeline.joints & tl.joints) \
                or (entry.timeline.has_face and tl.has_face) \
                or (entry.timeline.has_haptic and tl.has_haptic)
            if conflict:
                entry.ramping_out = True
                entry.ramp_start_ns = now_ns
                entry.ramp_end_ns = now_ns + ramp_ns
        self._order += 1
        entry = _Entry(timeline=tl, start_ns=now_ns, order=self._order)
        self.entries.append(entry)
        return entry

    def stop(self, entry: _Entry, now_ns: int, ramp_s: float = DEFAULT_RAMP_S) -> None:
        if entry.ramping_out:
            return
        entry.ramping_out = True
        entry.ramp_start_ns = now_ns
        entry.ramp_end_ns = now_ns + s_to_ns(ramp_s)

    def prune(self, now_ns: int) -> None:
        self.entries = [e for e in self.entries if not e.finished(now_ns)]

    # -- pure blend rule ------------------------------------------------------

    def _winner(self, candidates: list[_Entry]) -> Optional[_Entry]:
        if not candidates:
            return None
        # highest priority; ties go to the most recently started
        return max(candidates, key=lambda e: (e.timeline.priority,
                                              e.start_ns, e.order))

    def blend(self, now_ns: int, hold_joints: Mapping[JointId, float],
              hold_face: str, hold_haptic: float) -> TrackSample:
        """Combined output at `now_ns` given held values for anything no
        active timeline touches. During a preemption ramp the output is the
        linear mix of the fading value and its replacement."""
        live = [e for e in self.entries
                if e.start_ns <= now_ns and not e.finished(now_ns)]
        active = [e for e in live if not e.ramping_out]
        fading = [e for e in live if e.ramping_out]

        joints: dict[JointId, float] = {}
        for jid in JointId:
            winner = self._winner(
                [e for e in active if jid in e.timeline.joints])
            target = (winner.timeline.sample(winner.local_t(now_ns)).joints[jid]
                      if winner is not None else hold_joints.get(jid, 0.0))
            fades = [e for e in fading if jid in e.timeline.joints]
            if fades:
                fade = max(fades, key=lambda e: (e.ramp_start_ns, e.order))
                old = fade.timeline.sample(fade.local_t(now_ns)).joints[jid]
                joints[jid] = _mix(old, target, fade, now_ns)
            else:
                joints[jid] = target

        face_winner = self._winner([e for e in active if e.timeline.has_face])
        face = hold_face
        if face_winner is not None:
            sampled = face_winner.timeline.sample(
                face_winner.local_t(now_ns)).face
            if sampled is not None:
                face = sampled

        haptic_winner = self._winner(
            [e for e in active if e.timeline.has_haptic])
        haptic_target = (haptic_winner.timeline.sample(
            haptic_winner.local_t(now_ns)).haptic
            if haptic_winner is not None else hold_haptic)
        haptic_fades = [e for e in fading if e.timeline.has_haptic]
        if haptic_fades:
            fade = max(haptic_fades, key=lambda e: (e.ramp_start_ns, e.order))
            old = fade.timeline.sample(fade.local_t(now_ns)).haptic
            haptic = _mix(old, haptic_target, fade, now_ns)
        else:
            haptic = haptic_target
        return TrackSample(joints=joints, face=face, haptic=haptic)


def _mix(old: float, new: float, fade: _Entry, now_ns: int) -> float:
    span = fade.ramp_end_ns - fade.ramp_start_ns
    if span <= 0:
        return new
    alpha = (now_ns - fade.ramp_start_ns) / span
    alpha = min(1.0, max(0.0, alpha))
    return (1.0 - alpha) * old + alpha * new


class ExpressionEngine:
    """Ticked executor over an ActiveSet.

    Adds what the pure blend rule cannot know: held values for untouched
    outputs, a per-joint slew limiter bounding every tick step to
    v_max * dt, and the final limit clamp. Returns None for joints while
    fully idle so manual joint control is not overridden between behaviors.
    """

    def __init__(self, desc: RobotDescription,
                 default_ramp_s: float = DEFAULT_RAMP_S):
        self.desc = desc
        self.default_ramp_s = default_ramp_s
        self.active = ActiveSet()
        self._lock = threading.Lock()
        self.last_joints: dict[JointId, float] = desc.rest_pose()
        self.last_face = "neutral"
        self.last_haptic = 0.0

    def idle(self) -> bool:
        return not self.active.entries

    def start(self, tl: Timeline, now_ns: int,
              ramp_s: Optional[float] = None,
              current_joints: Optional[Mapping[JointId, float]] = None) -> _Entry:
        tl.validate_against(self.desc)
        if tl.is_empty():
            raise EmptyTimeline(f"timeline {tl.id!r} has no keyframes")
        with self._lock:
            if self.idle() and current_joints is not None:
                # resync holds to the true pose so the first tick is continuous
                # even after manual joint moves
                self.last_joints = dict(current_joints)
            return self.active.start(
                tl, now_ns,
                self.default_ramp_s if ramp_s is None else ramp_s)

    def stop(self, entry: _Entry, now_ns: int,
             ramp_s: Optional[float] = None) -> None:
        with self._lock:
            self.active.stop(
                entry, now_ns,
                self.default_ramp_s if ramp_s is None else ramp_s)

    def tick(self, now_ns: int, dt_s: float) -> TrackSample:
        """Commanded output for this tick; never steps a joint by more than
        v_max * dt or outside its limits."""
        with self._lock:
            raw = self.active.blend(now_ns, self.last_joints,
                                    self.last_face, self.last_haptic)
            joints: dict[JointId, float] = {}
            for jid, value in raw.joints.items():
                lim = self.desc.joints[jid]
                prev = self.last_joints[jid]
                step = max(-lim.v_max * dt_s,
                           min(lim.v_max * dt_s, value - prev))
                joints[jid] = lim.clamp(prev + step)
            self.last_joints = joints
            self.last_face = raw.face
            self.last_haptic = raw.haptic if raw.haptic is not None else 0.0
            self.active.prune(now_ns)
            return TrackSample(joints=dict(joints), face=self.last_face,
                               haptic=self.last_haptic)


# ---------------------------------------------------------------------------
# cue scheduling

@dataclass(frozen=True)
class Cue:
    offset_s: float
    timeline_id: str


@dataclass(frozen=True)
class CueSchedule:
    """Timelines to fire at offsets relative to an utterance start."""

    cues: tuple[Cue, ...]

    def validate_for(self, utterance_s: float,
                     grace_s: float = CUE_GRACE_S) -> None:
        for cue in self.cues:
            if cue.offset_s < 0 or cue.offset_s > utterance_s + grace_s:
                raise TimelineError(
                    f"cue offset {cue.offset_s} outside "
                    f"[0, {utterance_s + grace_s}]")

    @classmethod
    def from_list(cls, items: Sequence[Mapping]) -> "CueSchedule":
        return cls(cues=tuple(
            Cue(offset_s=i["offset"], timeline_id=i["timeline_id"])
            for i in items))


class CueGroup:
    """Handles for one utterance's scheduled cues; cancelable as a unit."""

    def __init__(self, handles):
        self._handles = list(handles)

    def cancel(self) -> None:
        for h in self._handles:
            h.cancel()


def schedule_cues(schedule: CueSchedule, utterance_start_ns: int,
                  dispatch: Callable[[str], None],
                  scheduler: Scheduler) -> CueGroup:
    """Arrange `dispatch(timeline_id)` at utterance_start + offset for every
    cue. Under a virtual clock the dispatch instants are exact."""
    handles = []
    for cue in schedule.cues:
        at = utterance_start_ns + s_to_ns(cue.offset_s)
        handles.append(scheduler.call_at(
            at, _CueFire(dispatch, cue.timeline_id)))
    return CueGroup(handles)


class _CueFire:
    __slots__ = ("dispatch", "timeline_id")

    def __init__(self, dispatch, timeline_id):
        self.dispatch = dispatch
        self.timeline_id = timeline_id

    def __call__(self):
        self.dispatch(self.timeline_id)


# ---------------------------------------------------------------------------
# built-in generators

def breathing_pattern(inhale_s: float, exhale_s: float, cycles: int,
                      timeline_id: str = "breathing",
                      priority: int = 0) -> Timeline:
    """Haptic timeline ramping 0 -> 1 over each inhale and 1 -> 0 over each
    exhale, repeated `cycles` times."""
    if inhale_s <= 0 or exhale_s <= 0:
        raise InvalidDuration("inhale and exhale must be positive")
    if cycles < 1:
        raise InvalidDuration("cycles must be >= 1")
    period = inhale_s + exhale_s
    kfs = [Keyframe(t=0.0, targets=0.0, easing="linear")]
    for c in range(cycles):
        base = c * period
        kfs.append(Keyframe(t=base + inhale_s, targets=1.0, easing="linear"))
        kfs.append(Keyframe(t=base + period, targets=0.0, easing="linear"))
    track = Track(kind="haptic", keyframes=tuple(kfs))
    return Timeline(timeline_id, [track], duration=cycles * period,
                    priority=priority)
