"""In-process message bus: topics, services, actions, interface registry.

The runtime talks to robot backends through three patterns: streaming
topics, synchronous services, and long-running cancelable actions. Each
named interface is registered with a schema id so that two backends (the
simulator and a hardware stub) can be diffed for exact interface parity.

Delivery model: per-subscriber bounded FIFO queues with drop-oldest on
overflow (drops are counted, never silent). Callback subscribers are
drained inline on the publishing thread under a per-subscription guard,
so one subscriber's callback never runs concurrently with itself.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import zlib
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .clock import Clock, RealClock, Scheduler
from .errors import MError

log = logging.getLogger(__name__)

_PATH_RE = re.compile(r"^(/[a-z0-9_]+)+$")

DEFAULT_QUEUE_LEN = 64


def canonical_json(value: Any) -> str:
    """Stable JSON text: sorted keys, no whitespace. Used for payload
    comparison, checksums, and registry exports."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def payload_crc(value: Any) -> str:
    return format(zlib.crc32(canonical_json(value).encode("utf-8")), "08x")


# ---------------------------------------------------------------------------
# errors

class BusError(MError):
    pass


class UnknownInterface(BusError, KeyError):
    pass


class SchemaMismatch(BusError):
    pass


class Timeout(BusError, TimeoutError):
    pass


class HandlerError(BusError):
    """Wraps an exception raised by a service handler."""

    def __init__(self, cause: BaseException):
        super().__init__(f"service handler failed: {cause!r}")
        self.cause = cause


class ServerBusy(BusError):
    pass


# ---------------------------------------------------------------------------
# schemas and interface names

class InterfaceKind(str, Enum):
    TOPIC = "topic"
    SERVICE = "service"
    ACTION = "action"


@dataclass(frozen=True)
class InterfaceName:
    path: str
    kind: InterfaceKind
    schema_id: str

    def __post_init__(self):
        if not _PATH_RE.match(self.path):
            raise ValueError(f"bad interface path: {self.path!r}")
        if "@" not in self.schema_id:
            raise ValueError(f"schema id must be name@version: {self.schema_id!r}")


@dataclass(frozen=True)
class Schema:
    """Structural payload description. Field types are JSON-level names:
    int, float, number, str, bool, object, array."""

    name: str
    version: int
    fields: tuple[tuple[str, str], ...]

    _CHECKS = {
        "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
        "float": lambda v: isinstance(v, float),
        "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        "str": lambda v: isinstance(v, str),
        "bool": lambda v: isinstance(v, bool),
        "object": lambda v: isinstance(v, dict),
        "array": lambda v: isinstance(v, list),
    }

    @property
    def schema_id(self) -> str:
        return f"{self.name}@{self.version}"

    def validate(self, payload: Any) -> None:
        if not isinstance(payload, dict):
            raise SchemaMismatch(f"{self.schema_id}: payload must be an object")
        for fname, ftype in self.fields:
            if fname not in payload:
                raise SchemaMismatch(f"{self.schema_id}: missing field {fname!r}")
            if not self._CHECKS[ftype](payload[fname]):
                raise SchemaMismatch(
                    f"{self.schema_id}: field {fname!r} is not {ftype}")


@dataclass(frozen=True)
class Envelope:
    """One message on a named interface."""

    interface: InterfaceName
    seq: int
    t_mono: int
    t_wall: int
    payload: Any


# ---------------------------------------------------------------------------
# topics

class Subscription:
    """Bounded FIFO view of one topic for one consumer.

    With a callback, messages are dispatched inline after each publish;
    the `_draining` guard serializes dispatch so the callback is never
    concurrent with itself. Without a callback, the consumer pulls with
    `poll()`. Overflow drops the oldest message and counts it.
    """

    def __init__(self, topic: "_Topic", callback: Optional[Callable[[Envelope], None]],
                 maxlen: int):
        self._topic = topic
        self._callback = callback
        self._maxlen = maxlen
        self._queue: deque[Envelope] = deque()
        self._lock = threading.Lock()
        self._draining = False
        self.drop_count = 0
        self.closed = False

    @property
    def path(self) -> str:
        return self._topic.iface.path

    @property
    def iface(self) -> InterfaceName:
        return self._topic.iface

    def _enqueue(self, env: Envelope) -> None:
        with self._lock:
            if self.closed:
                return
            if len(self._queue) >= self._maxlen:
                # drop-oldest; the count stays visible to health reporting
                self._queue.popleft()
                self.drop_count += 1
                self._topic.drops += 1
            self._queue.append(env)

    def _drain(self) -> None:
        if self._callback is None:
            return
        with self._lock:
            if self._draining:
                return
            self._draining = True
        while True:
            with self._lock:
                if not self._queue:
                    self._draining = False
                    return
                env = self._queue.popleft()
            try:
                self._callback(env)
            except Exception:
                log.exception("subscriber callback failed on %s", self.path)

    def poll(self, max_items: Optional[int] = None) -> list[Envelope]:
        out: list[Envelope] = []
        with self._lock:
            while self._queue and (max_items is None or len(out) < max_items):
                out.append(self._queue.popleft())
        return out

    def close(self) -> None:
        with self._lock:
            self.closed = True
            self._queue.clear()
        self._topic.remove(self)


class Publisher:
    """Per-publisher handle on one topic; owns the seq counter."""

    def __init__(self, bus: "MessageBus", topic: "_Topic", publisher_id: str):
        self._bus = bus
        self._topic = topic
        self.publisher_id = publisher_id
        self._seq = 0
        self._lock = threading.Lock()

    @property
    def iface(self) -> InterfaceName:
        return self._topic.iface

    def publish(self, payload: Any) -> Envelope:
        self._topic.schema.validate(payload)
        clock = self._bus.clock
        # seq assignment and fan-out are atomic per publisher so that
        # subscribers always observe per-publisher FIFO order.
        with self._lock:
            env = Envelope(
                interface=self._topic.iface,
                seq=self._seq,
                t_mono=clock.now_ns(),
                t_wall=clock.wall_ns(),
                payload=payload,
            )
            self._seq += 1
            subs = self._topic.snapshot_subs()
            for sub in subs:
                sub._enqueue(env)
            self._topic.note_publish(env.t_mono)
        for sub in subs:
            sub._drain()
        return env


class _Topic:
    def __init__(self, iface: InterfaceName, schema: Schema, provider_id: str):
        self.iface = iface
        self.schema = schema
        self.provider_id = provider_id
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()
        # health counters, read without locks by the monitor
        self.message_count = 0
        self.last_t_mono: Optional[int] = None
        self.drops = 0

    def snapshot_subs(self) -> list[Subscription]:
        with self._lock:
            return list(self._subs)

    def add(self, sub: Subscription) -> None:
        with self._lock:
            self._subs.append(sub)

    def remove(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def note_publish(self, t_mono: int) -> None:
        with self._lock:
            self.message_count += 1
            self.last_t_mono = t_mono


# ---------------------------------------------------------------------------
# services

class _Service:
    def __init__(self, iface: InterfaceName, schema: Schema,
                 handler: Callable[[Any], Any], provider_id: str):
        self.iface = iface
        self.schema = schema
        self.handler = handler
        self.provider_id = provider_id
        self.call_count = 0
        self.last_t_mono: Optional[int] = None


# ---------------------------------------------------------------------------
# actions

class GoalStatus(str, Enum):
    PENDING = "pending"
    ACTIVE = "active"
    SUCCEEDED = "succeeded"
    CANCELED = "canceled"
    ABORTED = "aborted"
    PREEMPTED = "preempted"


TERMINAL_STATUSES = frozenset(
    {GoalStatus.SUCCEEDED, GoalStatus.CANCELED, GoalStatus.ABORTED,
     GoalStatus.PREEMPTED})


class ActionHandle:
    """Client-side view of one goal: status history, feedback, result."""

    def __init__(self, goal_id: str, iface: InterfaceName, clock: Clock):
        self.goal_id = goal_id
        self.iface = iface
        self._clock = clock
        self._lock = threading.Lock()
        self._done = threading.Event()
        self.status = GoalStatus.PENDING
        self.history: list[tuple[GoalStatus, int]] = [
            (GoalStatus.PENDING, clock.now_ns())]
        self.feedback: list[Envelope] = []
        self.result: Any = None
        self.error: Optional[str] = None
        self._feedback_seq = 0
        self._feedback_cb: Optional[Callable[[Envelope], None]] = None
        self._done_cbs: list[Callable[["ActionHandle"], None]] = []
        self._cancel_requested = False

    # -- client side ------------------------------------------------------

    @property
    def done(self) -> bool:
        return self.status in TERMINAL_STATUSES

    def on_feedback(self, cb: Callable[[Envelope], None]) -> None:
        self._feedback_cb = cb

    def on_done(self, cb: Callable[["ActionHandle"], None]) -> None:
        """Register a callback for the terminal transition; fires
        immediately if the goal is already terminal."""
        fire_now = False
        with self._lock:
            if self.done:
                fire_now = True
            else:
                self._done_cbs.append(cb)
        if fire_now:
            cb(self)

    def wait(self, timeout_s: Optional[float] = None) -> GoalStatus:
        """Block until terminal (real-clock stacks only; virtual-time tests
        pump the scheduler instead)."""
        if not self._done.wait(timeout=timeout_s):
            raise Timeout(f"goal {self.goal_id} not terminal after {timeout_s}s")
        return self.status

    # -- server/runtime side ------------------------------------------------

    def _set_status(self, status: GoalStatus) -> bool:
        """Non-terminal transitions (pending -> active)."""
        assert status not in TERMINAL_STATUSES
        with self._lock:
            if self.done:
                return False
            self.status = status
            self.history.append((status, self._clock.now_ns()))
        return True

    def _finish(self, status: GoalStatus, result: Any,
                error: Optional[str]) -> bool:
        """Terminal transition; atomic, first caller wins."""
        with self._lock:
            if self.done:
                return False
            self.result = result
            self.error = error
            self.status = status
            self.history.append((status, self._clock.now_ns()))
            cbs = list(self._done_cbs)
            self._done_cbs.clear()
        self._done.set()
        for cb in cbs:
            try:
                cb(self)
            except Exception:
                log.exception("goal done callback failed")
        return True

    def _push_feedback(self, payload: Any) -> Optional[Envelope]:
        with self._lock:
            if self.done:
                return None
            env = Envelope(
                interface=self.iface,
                seq=self._feedback_seq,
                t_mono=self._clock.now_ns(),
                t_wall=self._clock.wall_ns(),
                payload=payload,
            )
            self._feedback_seq += 1
            self.feedback.append(env)
        cb = self._feedback_cb
        if cb is not None:
            try:
                cb(env)
            except Exception:
                log.exception("feedback callback failed on %s", self.iface.path)
        return env


class GoalContext:
    """Server-side control surface for one accepted goal.

    Exactly one terminal transition ever takes effect; later attempts are
    no-ops returning False. Feedback after the terminal status is dropped.
    """

    def __init__(self, server: "_ActionServer", handle: ActionHandle, goal: Any):
        self._server = server
        self._handle = handle
        self.goal = goal
        self.on_cancel: Optional[Callable[["GoalContext", str], None]] = None

    @property
    def goal_id(self) -> str:
        return self._handle.goal_id

    @property
    def status(self) -> GoalStatus:
        return self._handle.status

    @property
    def cancel_requested(self) -> bool:
        return self._handle._cancel_requested

    def publish_feedback(self, payload: Any) -> bool:
        return self._handle._push_feedback(payload) is not None

    def succeed(self, result: Any = None) -> bool:
        return self._terminate(GoalStatus.SUCCEEDED, result=result)

    def abort(self, error: str = "aborted") -> bool:
        return self._terminate(GoalStatus.ABORTED, error=error)

    def canceled(self) -> bool:
        return self._terminate(GoalStatus.CANCELED)

    def _terminate(self, status: GoalStatus, result: Any = None,
                   error: Optional[str] = None) -> bool:
        if not self._handle._finish(status, result, error):
            return False
        self._server._goal_finished(self)
        return True


class _ActionServer:
    """Registered server for one action interface.

    Goal admission policy:
      multi    - every goal is activated immediately; the server sorts
                 out contention itself.
      preempt  - single goal; a newcomer forces the current goal to the
                 `preempted` terminal status.
      queue    - single goal; newcomers wait in FIFO order.
      reject   - single goal; newcomers get ServerBusy.
    """

    def __init__(self, bus: "MessageBus", iface: InterfaceName, schema: Schema,
                 on_goal: Callable[[GoalContext], None], policy: str,
                 provider_id: str):
        if policy not in ("multi", "preempt", "queue", "reject"):
            raise ValueError(f"unknown goal policy: {policy}")
        self.bus = bus
        self.iface = iface
        self.schema = schema
        self.on_goal = on_goal
        self.policy = policy
        self.provider_id = provider_id
        self._lock = threading.RLock()
        self._current: Optional[GoalContext] = None
        self._queue: deque[GoalContext] = deque()
        self._live: dict[str, GoalContext] = {}
        self.goal_count = 0
        self.last_t_mono: Optional[int] = None

    def submit(self, goal: Any) -> ActionHandle:
        self.schema.validate(goal)
        self.goal_count += 1
        self.last_t_mono = self.bus.clock.now_ns()
        handle = ActionHandle(self.bus._next_goal_id(), self.iface, self.bus.clock)
        ctx = GoalContext(self, handle, goal)
        to_preempt: Optional[GoalContext] = None
        start_now = False
        with self._lock:
            self._live[handle.goal_id] = ctx
            if self.policy == "multi":
                start_now = True
            elif self._current is None:
                self._current = ctx
                start_now = True
            elif self.policy == "reject":
                raise ServerBusy(f"{self.iface.path}: a goal is already active")
            elif self.policy == "queue":
                self._queue.append(ctx)
            else:  # preempt
                to_preempt = self._current
                self._current = ctx
                start_now = True
        if to_preempt is not None:
            self._force_preempt(to_preempt)
        if start_now:
            self._activate(ctx)
        return handle

    def _activate(self, ctx: GoalContext) -> None:
        if not ctx._handle._set_status(GoalStatus.ACTIVE):
            return  # canceled while queued
        try:
            self.on_goal(ctx)
        except Exception as exc:
            # A server that raises from goal acceptance aborts the goal.
            ctx.abort(error=repr(exc))
            raise

    def _force_preempt(self, ctx: GoalContext) -> None:
        cb = ctx.on_cancel
        if cb is not None:
            try:
                cb(ctx, "preempt")
            except Exception:
                log.exception("on_cancel failed for %s", self.iface.path)
        # Runtime guarantees the terminal status even if the server ignored
        # the notification.
        ctx._terminate(GoalStatus.PREEMPTED)

    def request_cancel(self, handle: ActionHandle) -> None:
        handle._cancel_requested = True
        with self._lock:
            ctx = self._live.get(handle.goal_id)
            if ctx is None:
                return
            if ctx in self._queue:
                self._queue.remove(ctx)
                ctx._terminate(GoalStatus.CANCELED)
                return
        if handle.status == GoalStatus.ACTIVE:
            cb = ctx.on_cancel
            if cb is not None:
                try:
                    cb(ctx, "cancel")
                    return  # server decides the moment of the terminal status
                except Exception:
                    log.exception("on_cancel failed for %s", self.iface.path)
            ctx.canceled()

    def _goal_finished(self, ctx: GoalContext) -> None:
        nxt: Optional[GoalContext] = None
        with self._lock:
            self._live.pop(ctx.goal_id, None)
            if self._current is ctx:
                self._current = None
                if self._queue:
                    nxt = self._queue.popleft()
                    self._current = nxt
        if nxt is not None:
            self._activate(nxt)


# ---------------------------------------------------------------------------
# registry snapshots and diffing

@dataclass(frozen=True)
class RegistryEntry:
    path: str
    kind: str
    schema_id: str


@dataclass
class RegistrySnapshot:
    entries: tuple[RegistryEntry, ...]

    def to_json(self) -> str:
        items = sorted(self.entries, key=lambda e: (e.path, e.kind))
        return canonical_json(
            {"interfaces": [
                {"path": e.path, "kind": e.kind, "schema_id": e.schema_id}
                for e in items]})

    @classmethod
    def from_json(cls, text: str) -> "RegistrySnapshot":
        data = json.loads(text)
        return cls(entries=tuple(
            RegistryEntry(e["path"], e["kind"], e["schema_id"])
            for e in data["interfaces"]))


@dataclass(frozen=True)
class Discrepancy:
    kind: str  # missing | extra | schema_mismatch
    path: str
    iface_kind: str
    detail: str


def registry_diff(a: RegistrySnapshot, b: RegistrySnapshot) -> list[Discrepancy]:
    """Differences between two interface sets. Empty iff equivalent:
    identical (path, kind, schema_id) triples."""
    amap = {(e.path, e.kind): e.schema_id for e in a.entries}
    bmap = {(e.path, e.kind): e.schema_id for e in b.entries}
    out: list[Discrepancy] = []
    for key in sorted(set(amap) | set(bmap)):
        path, kind = key
        if key not in bmap:
            out.append(Discrepancy("missing", path, kind,
                                   f"present in first only (schema {amap[key]})"))
        elif key not in amap:
            out.append(Discrepancy("extra", path, kind,
                                   f"present in second only (schema {bmap[key]})"))
        elif amap[key] != bmap[key]:
            out.append(Discrepancy(
                "schema_mismatch", path, kind,
                f"schema {amap[key]} vs {bmap[key]}"))
    return out


# ---------------------------------------------------------------------------
# the bus

@dataclass
class NodeRecord:
    node_id: str
    started_t_mono: int
    alive: bool = True


class MessageBus:
    """Single-process message runtime. Thread-safe; time source injectable."""

    def __init__(self, clock: Optional[Clock] = None,
                 scheduler: Optional[Scheduler] = None):
        self.clock = clock if clock is not None else RealClock()
        self.scheduler = scheduler if scheduler is not None else Scheduler(self.clock)
        self._lock = threading.RLock()
        self._schemas: dict[str, Schema] = {}
        self._topics: dict[str, _Topic] = {}
        self._services: dict[str, _Service] = {}
        self._actions: dict[str, _ActionServer] = {}
        self._nodes: dict[str, NodeRecord] = {}
        self._goal_counter = 0
        self.started_t_mono = self.clock.now_ns()

    # -- schemas ---------------------------------------------------------

    def register_schema(self, schema: Schema) -> Schema:
        with self._lock:
            existing = self._schemas.get(schema.schema_id)
            if existing is not None and existing != schema:
                raise SchemaMismatch(
                    f"conflicting definitions for schema {schema.schema_id}")
            self._schemas[schema.schema_id] = schema
        return schema

    def schema(self, schema_id: str) -> Schema:
        try:
            return self._schemas[schema_id]
        except KeyError:
            raise UnknownInterface(f"schema not registered: {schema_id}")

    def has_schema(self, schema_id: str) -> bool:
        return schema_id in self._schemas

    # -- nodes -----------------------------------------------------------

    def register_node(self, node_id: str) -> NodeRecord:
        with self._lock:
            rec = self._nodes.get(node_id)
            if rec is None:
                rec = NodeRecord(node_id, self.clock.now_ns())
                self._nodes[node_id] = rec
            return rec

    # -- registration ------------------------------------------------------

    def _register(self, path: str, kind: InterfaceKind, schema_id: str) -> InterfaceName:
        iface = InterfaceName(path, kind, schema_id)
        self.schema(schema_id)  # must exist
        with self._lock:
            table = {InterfaceKind.TOPIC: self._topics,
                     InterfaceKind.SERVICE: self._services,
                     InterfaceKind.ACTION: self._actions}[kind]
            if path in table:
                raise BusError(f"{kind.value} already registered: {path}")
        return iface

    def create_topic(self, path: str, schema_id: str,
                     provider_id: str = "anon") -> InterfaceName:
        iface = self._register(path, InterfaceKind.TOPIC, schema_id)
        with self._lock:
            self._topics[path] = _Topic(iface, self.schema(schema_id), provider_id)
        return iface

    def advertise_service(self, path: str, schema_id: str,
                          handler: Callable[[Any], Any],
                          provider_id: str = "anon") -> InterfaceName:
        iface = self._register(path, InterfaceKind.SERVICE, schema_id)
        with self._lock:
            self._services[path] = _Service(
                iface, self.schema(schema_id), handler, provider_id)
        return iface

    def advertise_action(self, path: str, schema_id: str,
                         on_goal: Callable[[GoalContext], None],
                         policy: str = "preempt",
                         provider_id: str = "anon") -> InterfaceName:
        iface = self._register(path, InterfaceKind.ACTION, schema_id)
        with self._lock:
            self._actions[path] = _ActionServer(
                self, iface, self.schema(schema_id), on_goal, policy, provider_id)
        return iface

    # -- topics ------------------------------------------------------------

    def _topic(self, path: str) -> _Topic:
        topic = self._topics.get(path)
        if topic is None:
            kind = self._kind_of(path)
            if kind is not None:
                raise UnknownInterface(
                    f"{path} is a {kind}, not a topic")
            raise UnknownInterface(f"topic not registered: {path}")
        return topic

    def create_publisher(self, path: str, publisher_id: str = "anon") -> Publisher:
        return Publisher(self, self._topic(path), publisher_id)

    def publish(self, path: str, payload: Any,
                publisher_id: str = "anon") -> Envelope:
        """One-shot publish; sustained streams should hold a Publisher."""
        return self.create_publisher(path, publisher_id).publish(payload)

    def subscribe(self, path: str,
                  callback: Optional[Callable[[Envelope], None]] = None,
                  maxlen: int = DEFAULT_QUEUE_LEN) -> Subscription:
        topic = self._topic(path)
        sub = Subscription(topic, callback, maxlen)
        topic.add(sub)
        return sub

    # -- services ------------------------------------------------------------

    def call(self, path: str, request: Any, timeout_s: float = 5.0) -> Any:
        svc = self._services.get(path)
        if svc is None:
            kind = self._kind_of(path)
            if kind is not None:
                raise UnknownInterface(f"{path} is a {kind}, not a service")
            raise UnknownInterface(f"service not registered: {path}")
        svc.schema.validate(request)
        svc.call_count += 1
        svc.last_t_mono = self.clock.now_ns()

        box: dict[str, Any] = {}
        done = threading.Event()

        def runner():
            try:
                box["reply"] = svc.handler(request)
            except BaseException as exc:  # noqa: BLE001 - propagated to caller
                box["error"] = exc
            done.set()

        t = threading.Thread(target=runner, daemon=True,
                             name=f"svc{path.replace('/', '-')}")
        t.start()
        if not done.wait(timeout=timeout_s):
            raise Timeout(f"service {path} did not reply within {timeout_s}s")
        if "error" in box:
            raise HandlerError(box["error"])
        return box["reply"]

    # -- actions -------------------------------------------------------------

    def send_goal(self, path: str, goal: Any) -> ActionHandle:
        server = self._actions.get(path)
        if server is None:
            kind = self._kind_of(path)
            if kind is not None:
                raise UnknownInterface(f"{path} is a {kind}, not an action")
            raise UnknownInterface(f"action not registered: {path}")
        return server.submit(goal)

    def cancel_goal(self, handle: ActionHandle) -> None:
        server = self._actions.get(handle.iface.path)
        if server is None:
            raise UnknownInterface(f"action not registered: {handle.iface.path}")
        server.request_cancel(handle)

    def _next_goal_id(self) -> str:
        with self._lock:
            self._goal_counter += 1
            return f"goal-{self._goal_counter:06d}"

    # -- registry --------------------------------------------------------------

    def _kind_of(self, path: str) -> Optional[str]:
        if path in self._topics:
            return "topic"
        if path in self._services:
            return "service"
        if path in self._actions:
            return "action"
        return None

    def registry_snapshot(self, provider_id: Optional[str] = None) -> RegistrySnapshot:
        """Current interface set, optionally restricted to one provider."""
        entries: list[RegistryEntry] = []
        with self._lock:
            groups = [
                (self._topics, "topic"), (self._services, "service"),
                (self._actions, "action")]
            for table, kind in groups:
                for path, item in table.items():
                    if provider_id is not None and item.provider_id != provider_id:
                        continue
                    entries.append(RegistryEntry(path, kind, item.iface.schema_id))
        entries.sort(key=lambda e: (e.path, e.kind))
        return RegistrySnapshot(entries=tuple(entries))

    # -- health counters (read by logkit without locking) ----------------------

    def interface_stats(self) -> dict[str, dict[str, Any]]:
        out: dict[str, dict[str, Any]] = {}
        with self._lock:
            topics = list(self._topics.items())
            services = list(self._services.items())
            actions = list(self._actions.items())
        for path, t in topics:
            out[path] = {"kind": "topic", "count": t.message_count,
                         "last_t_mono": t.last_t_mono, "drops": t.drops}
        for path, s in services:
            out[path] = {"kind": "service", "count": s.call_count,
                         "last_t_mono": s.last_t_mono, "drops": 0}
        for path, a in actions:
            out[path] = {"kind": "action", "count": a.goal_count,
                         "last_t_mono": a.last_t_mono, "drops": 0}
        return out

    def node_records(self) -> list[NodeRecord]:
        with self._lock:
            return list(self._nodes.values())
