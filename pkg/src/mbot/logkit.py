"""Session-scoped logging, deterministic replay, and health reporting.

Log format is JSON Lines: one header line (session metadata, stream
interface specs, schema definitions), then one record per line with both
monotonic and wall timestamps plus a CRC32 of its payload, then an end
marker on clean close. Append-only, so a file truncated at any byte
boundary is still readable up to the last complete record; the end marker
is how a reader distinguishes a complete log from a torn one.

Health reporting reads counters the bus already maintains on its publish
path, so generating a report adds no work for publishers.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

from .bus import (MessageBus, RegistryEntry, Schema, Subscription,
                  UnknownInterface, canonical_json, payload_crc)
from .clock import ns_to_s, s_to_ns
from .errors import MError

log = logging.getLogger(__name__)

FORMAT_ID = "mlog/1"
DATA_DIR_ENV = "M_DATA_DIR"
DEFAULT_ROTATE_BYTES = 64 * 1024 * 1024
RECORDER_QUEUE_LEN = 4096
SYSTEM_STREAM = "/sys/recorder"


class LogError(MError):
    pass


class StorageFull(LogError):
    pass


class CorruptLog(LogError):
    def __init__(self, message: str, last_valid: Optional[tuple[str, int]] = None):
        super().__init__(message)
        self.last_valid = last_valid


def data_dir(root: Optional[str] = None) -> Path:
    if root is not None:
        return Path(root)
    return Path(os.environ.get(DATA_DIR_ENV, "./m_data"))


@dataclass
class SessionRecord:
    session_id: str
    started_wall_ns: int
    ended_wall_ns: Optional[int] = None
    metadata: dict[str, str] = field(default_factory=dict)

    @classmethod
    def open(cls, bus: MessageBus, metadata: Optional[Mapping[str, str]] = None,
             session_id: Optional[str] = None) -> "SessionRecord":
        return cls(
            session_id=session_id or str(uuid.uuid4()),
            started_wall_ns=bus.clock.wall_ns(),
            metadata=dict(metadata or {}))

    def to_dict(self) -> dict:
        return {"session_id": self.session_id,
                "started_wall_ns": self.started_wall_ns,
                "ended_wall_ns": self.ended_wall_ns,
                "metadata": self.metadata}


@dataclass(frozen=True)
class LogRecord:
    session_id: str
    stream: str
    seq: int
    t_mono: int
    t_wall: int
    payload: Any

    def key(self) -> tuple[str, int, str]:
        return (self.stream, self.seq, canonical_json(self.payload))


def _record_line(stream: str, seq: int, t_mono: int, t_wall: int,
                 payload: Any) -> str:
    return canonical_json({
        "kind": "record", "stream": stream, "seq": seq,
        "t_mono": t_mono, "t_wall": t_wall, "payload": payload,
        "crc": payload_crc(payload)})


class LogWriter:
    """Append-only JSONL writer for one session directory, with size-based
    rotation into numbered parts."""

    def __init__(self, directory: Path, session: SessionRecord,
                 streams: Iterable[RegistryEntry],
                 schemas: Mapping[str, Any],
                 rotate_bytes: int = DEFAULT_ROTATE_BYTES):
        self.directory = directory
        self.session = session
        self.streams = list(streams)
        self.schemas = dict(schemas)
        self.rotate_bytes = rotate_bytes
        self._part = -1
        self._fh = None
        self._bytes = 0
        self._records = 0
        self.rotations = 0
        directory.mkdir(parents=True, exist_ok=True)
        self._open_part()

    def _part_path(self, part: int) -> Path:
        return self.directory / f"log-{part:03d}.jsonl"

    def _open_part(self) -> None:
        self._part += 1
        self._fh = open(self._part_path(self._part), "w", encoding="utf-8")
        header = canonical_json({
            "kind": "header", "format": FORMAT_ID, "part": self._part,
            "session": self.session.to_dict(),
            "streams": [{"path": e.path, "kind": e.kind,
                         "schema_id": e.schema_id} for e in self.streams],
            "schemas": self.schemas})
        self._fh.write(header + "\n")
        self._bytes = len(header) + 1
        self._records = 0

    def write_record(self, stream: str, seq: int, t_mono: int, t_wall: int,
                     payload: Any) -> None:
        line = _record_line(stream, seq, t_mono, t_wall, payload)
        try:
            self._fh.write(line + "\n")
        except OSError as exc:
            raise StorageFull(f"log write failed: {exc}") from exc
        self._bytes += len(line) + 1
        self._records += 1
        if self._bytes >= self.rotate_bytes:
            self._rotate()

    def _rotate(self) -> None:
        self._close_part()
        self.rotations += 1
        self._open_part()

    def _close_part(self) -> None:
        end = canonical_json({"kind": "end", "records": self._records,
                              "ended_wall_ns": self.session.ended_wall_ns})
        self._fh.write(end + "\n")
        self._fh.close()
        self._fh = None

    def flush(self) -> None:
        if self._fh is not None:
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._close_part()


# ---------------------------------------------------------------------------
# reading

@dataclass
class LogContents:
    session: SessionRecord
    streams: list[RegistryEntry]
    schemas: dict[str, Any]
    records: list[LogRecord]
    complete: bool
    last_valid: Optional[tuple[str, int]]


def read_session(directory: Path, strict: bool = False) -> LogContents:
    """Read every complete record from a session directory.

    Tolerates truncation by default, reporting `complete=False`; with
    `strict=True` any torn part, checksum mismatch, or missing end marker
    raises CorruptLog naming the last valid record.
    """
    parts = sorted(directory.glob("log-*.jsonl"))
    if not parts:
        raise CorruptLog(f"no log parts in {directory}")
    session: Optional[SessionRecord] = None
    streams: list[RegistryEntry] = []
    schemas: dict[str, Any] = {}
    records: list[LogRecord] = []
    complete = True
    last_valid: Optional[tuple[str, int]] = None

    def fail(message: str) -> None:
        nonlocal complete
        complete = False
        if strict:
            raise CorruptLog(message + (
                f" (last valid record: {last_valid[0]} seq {last_valid[1]})"
                if last_valid else " (no valid records)"), last_valid)

    for part in parts:
        with open(part, "r", encoding="utf-8") as fh:
            raw = fh.read()
        saw_end = False
        for lineno, line in enumerate(raw.split("\n"), start=1):
            if line == "":
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                # torn line from truncation mid-write
                fail(f"{part.name}:{lineno}: unreadable line")
                break
            kind = obj.get("kind")
            if kind == "header":
                sess = obj["session"]
                session = SessionRecord(
                    session_id=sess["session_id"],
                    started_wall_ns=sess["started_wall_ns"],
                    ended_wall_ns=sess.get("ended_wall_ns"),
                    metadata=sess.get("metadata", {}))
                if not streams:
                    streams = [RegistryEntry(s["path"], s["kind"],
                                             s["schema_id"])
                               for s in obj.get("streams", [])]
                    schemas = obj.get("schemas", {})
            elif kind == "record":
                if payload_crc(obj["payload"]) != obj["crc"]:
                    fail(f"{part.name}:{lineno}: checksum mismatch")
                    break
                rec = LogRecord(
                    session_id=session.session_id if session else "",
                    stream=obj["stream"], seq=obj["seq"],
                    t_mono=obj["t_mono"], t_wall=obj["t_wall"],
                    payload=obj["payload"])
                records.append(rec)
                last_valid = (rec.stream, rec.seq)
            elif kind == "end":
                saw_end = True
        if not saw_end:
            fail(f"{part.name}: missing end marker")
    if session is None:
        raise CorruptLog(f"no readable header in {directory}")
    return LogContents(session=session, streams=streams, schemas=schemas,
                       records=records, complete=complete,
                       last_valid=last_valid)


# ---------------------------------------------------------------------------
# recorder

class Recorder:
    """Captures envelopes from subscribed streams into a session log.

    Consumption runs on a dedicated writer thread (flushing at least once
    a second) so persistence never runs on the publish path; tests drive
    `flush()` directly for deterministic capture. Queue overflow drops the
    oldest envelopes and the drop totals are themselves logged as system
    events on the next flush.
    """

    def __init__(self, bus: MessageBus, session: SessionRecord,
                 streams: Iterable[str], directory: Path,
                 rotate_bytes: int = DEFAULT_ROTATE_BYTES,
                 queue_len: int = RECORDER_QUEUE_LEN,
                 start_writer_thread: bool = True):
        self.bus = bus
        self.session = session
        stats = bus.interface_stats()
        entries: list[RegistryEntry] = []
        schemas: dict[str, Any] = {}
        self._subs: dict[str, Subscription] = {}
        for path in streams:
            if path not in stats:
                raise UnknownInterface(f"cannot record unknown stream {path}")
            if stats[path]["kind"] != "topic":
                raise UnknownInterface(f"can only record topics, {path} is "
                                       f"{stats[path]['kind']}")
            sub = bus.subscribe(path, callback=None, maxlen=queue_len)
            self._subs[path] = sub
            iface = sub.iface
            entries.append(RegistryEntry(path, "topic", iface.schema_id))
            schema = bus.schema(iface.schema_id)
            schemas[iface.schema_id] = {name: ftype
                                        for name, ftype in schema.fields}
        entries.sort(key=lambda e: e.path)
        self._writer = LogWriter(directory, session, entries, schemas,
                                 rotate_bytes=rotate_bytes)
        self._sys_seq = 0
        self._reported_drops: dict[str, int] = {path: 0 for path in self._subs}
        self._reported_rotations = 0
        self._lock = threading.Lock()
        self._closed = False
        self._thread: Optional[threading.Thread] = None
        self._stop = threading.Event()
        if start_writer_thread:
            self._thread = threading.Thread(
                target=self._writer_loop, name="mbot-recorder", daemon=True)
            self._thread.start()

    def _writer_loop(self) -> None:
        while not self._stop.wait(timeout=1.0):
            try:
                self.flush()
            except StorageFull:
                log.exception("recorder stopping: storage full")
                return

    def flush(self) -> None:
        with self._lock:
            if self._closed:
                return
            for path, sub in self._subs.items():
                for env in sub.poll():
                    self._writer.write_record(
                        path, env.seq, env.t_mono, env.t_wall, env.payload)
                dropped = sub.drop_count
                if dropped > self._reported_drops[path]:
                    delta = dropped - self._reported_drops[path]
                    self._reported_drops[path] = dropped
                    self._write_system_event(
                        {"event": "drops", "stream": path, "count": delta})
            while self._writer.rotations > self._reported_rotations:
                self._reported_rotations += 1
                self._write_system_event(
                    {"event": "rotated", "part": self._reported_rotations})
            self._writer.flush()

    def _write_system_event(self, payload: dict) -> None:
        clock = self.bus.clock
        self._writer.write_record(SYSTEM_STREAM, self._sys_seq,
                                  clock.now_ns(), clock.wall_ns(), payload)
        self._sys_seq += 1

    def close(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        self.flush()
        with self._lock:
            if self._closed:
                return
            self._closed = True
            for sub in self._subs.values():
                sub.close()
            self.session.ended_wall_ns = self.bus.clock.wall_ns()
            self._writer.close()


def record(bus: MessageBus, session: SessionRecord, streams: Iterable[str],
           directory: Optional[Path] = None, **kwargs) -> Recorder:
    """Start recording `streams` under <data dir>/<session id>/."""
    base = directory if directory is not None else data_dir() / session.session_id
    return Recorder(bus, session, streams, base, **kwargs)


# ---------------------------------------------------------------------------
# replay

def replay(directory: Path, bus: MessageBus,
           speed: Optional[float] = None) -> int:
    """Republish a recorded session onto `bus`.

    With `speed=None` records replay as fast as possible in t_mono order;
    with a positive speed the original inter-record gaps are scaled by
    1/speed using the bus scheduler. The log must be complete; torn or
    corrupt logs raise CorruptLog. Returns the number of records published.
    """
    contents = read_session(directory, strict=True)
    known = {e.path for e in contents.streams}
    stats = bus.interface_stats()
    for entry in contents.streams:
        # the log is self-describing: recreate missing schemas and topics
        if not bus.has_schema(entry.schema_id):
            schema_fields = contents.schemas.get(entry.schema_id, {})
            name, _, version = entry.schema_id.partition("@")
            bus.register_schema(Schema(
                name, int(version), tuple(sorted(schema_fields.items()))))
        if entry.path not in stats:
            bus.create_topic(entry.path, entry.schema_id, "replay")
    publishers = {path: bus.create_publisher(path, "replay")
                  for path in known}
    todo = sorted((r for r in contents.records if r.stream in known),
                  key=lambda r: (r.t_mono, r.stream, r.seq))
    if speed is None:
        for rec in todo:
            publishers[rec.stream].publish(rec.payload)
        return len(todo)
    if speed <= 0:
        raise LogError("speed must be positive")
    if not todo:
        return 0
    if not bus.clock.is_virtual:
        bus.scheduler.start()  # idempotent; timed replay needs the driver
    t0 = todo[0].t_mono
    start = bus.clock.now_ns()
    done = threading.Event()
    remaining = [len(todo)]

    def make_fire(rec: LogRecord):
        def fire():
            publishers[rec.stream].publish(rec.payload)
            remaining[0] -= 1
            if remaining[0] == 0:
                done.set()
        return fire

    for rec in todo:
        at = start + int((rec.t_mono - t0) / speed)
        bus.scheduler.call_at(at, make_fire(rec))
    if bus.clock.is_virtual:
        bus.scheduler.run_until(done.is_set, limit_s=ns_to_s(
            int((todo[-1].t_mono - t0) / speed)) + 5.0)
    else:
        done.wait()
    return len(todo)


# ---------------------------------------------------------------------------
# health

def health(bus: MessageBus) -> dict:
    """Health snapshot assembled from passively maintained counters."""
    now = bus.clock.now_ns()
    interfaces = {}
    for path, st in bus.interface_stats().items():
        last = st["last_t_mono"]
        ref = last if last is not None else bus.started_t_mono
        interfaces[path] = {
            "kind": st["kind"],
            "count": st["count"],
            "drop_count": st["drops"],
            "last_message_age_s": max(0.0, ns_to_s(now - ref)),
        }
    nodes = {rec.node_id: {"alive": rec.alive,
                           "uptime_s": ns_to_s(now - rec.started_t_mono)}
             for rec in bus.node_records()}
    return {
        "uptime_s": ns_to_s(now - bus.started_t_mono),
        "interfaces": interfaces,
        "nodes": nodes,
    }
