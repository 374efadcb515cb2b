import random
import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbot.bus import (GoalStatus, HandlerError, MessageBus, RegistryEntry,
                      RegistrySnapshot, Schema, SchemaMismatch, ServerBusy,
                      Timeout, UnknownInterface, registry_diff)

PING = Schema("ping", 1, (("value", "number"),))
ECHO = Schema("echo", 1, (("value", "number"),))
GOAL = Schema("goal", 1, (("value", "number"),))


def make_bus(stack):
    bus = stack.bus
    bus.register_schema(PING)
    bus.register_schema(ECHO)
    bus.register_schema(GOAL)
    return bus


# ---------------------------------------------------------------------------
# topics

def test_publish_delivers_identical_payload(stack):
    bus = make_bus(stack)
    bus.create_topic("/t/ping", "ping@1")
    got = []
    bus.subscribe("/t/ping", got.append)
    payload = {"value": 4.25}
    env = bus.publish("/t/ping", payload)
    assert len(got) == 1
    assert got[0].payload is payload
    assert env.seq == 0


def test_seq_strictly_increases_per_publisher(stack):
    bus = make_bus(stack)
    bus.create_topic("/t/ping", "ping@1")
    got = []
    bus.subscribe("/t/ping", got.append)
    pub = bus.create_publisher("/t/ping", "p1")
    pub.publish({"value": 1})
    pub.publish({"value": 2})
    assert [e.seq for e in got] == [0, 1]
    assert got[0].t_mono <= got[1].t_mono


def test_publish_unregistered_path_raises(stack):
    bus = make_bus(stack)
    with pytest.raises(UnknownInterface):
        bus.publish("/t/nope", {"value": 1})


def test_schema_mismatch_rejected(stack):
    bus = make_bus(stack)
    bus.create_topic("/t/ping", "ping@1")
    with pytest.raises(SchemaMismatch):
        bus.publish("/t/ping", {"bogus": 1})
    with pytest.raises(SchemaMismatch):
        bus.publish("/t/ping", {"value": "not a number"})


def test_queue_overflow_drops_oldest_and_counts(stack):
    bus = make_bus(stack)
    bus.create_topic("/t/ping", "ping@1")
    sub = bus.subscribe("/t/ping", callback=None, maxlen=4)
    pub = bus.create_publisher("/t/ping")
    for i in range(10):
        pub.publish({"value": i})
    kept = sub.poll()
    assert [e.payload["value"] for e in kept] == [6, 7, 8, 9]
    assert sub.drop_count == 6


def test_callback_never_concurrent_with_itself(stack):
    bus = make_bus(stack)
    bus.create_topic("/t/ping", "ping@1")
    inside = threading.Semaphore(1)
    violations = []

    def cb(env):
        if not inside.acquire(blocking=False):
            violations.append(env)
            return
        time.sleep(0.0005)
        inside.release()

    bus.subscribe("/t/ping", cb, maxlen=10_000)
    threads = [threading.Thread(
        target=lambda: [bus.publish("/t/ping", {"value": 1})
                        for _ in range(200)]) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert violations == []


def test_per_publisher_fifo_under_concurrent_publishers(stack):
    bus = make_bus(stack)
    bus.create_topic("/t/ping", "ping@1")
    received = []
    lock = threading.Lock()

    def cb(env):
        with lock:
            received.append((env.payload["value"], env.seq))

    bus.subscribe("/t/ping", cb, maxlen=100_000)
    n_pub, n_msg = 4, 500

    def worker(pid):
        pub = bus.create_publisher("/t/ping", f"p{pid}")
        for _ in range(n_msg):
            pub.publish({"value": pid})

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(n_pub)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(received) == n_pub * n_msg
    for pid in range(n_pub):
        seqs = [seq for value, seq in received if value == pid]
        assert seqs == sorted(seqs)
        assert seqs == list(range(n_msg))


# ---------------------------------------------------------------------------
# services

def test_echo_service(stack):
    bus = make_bus(stack)
    bus.advertise_service("/s/echo", "echo@1", lambda req: req)
    assert bus.call("/s/echo", {"value": 7}) == {"value": 7}


def test_service_timeout(stack):
    bus = make_bus(stack)
    bus.advertise_service("/s/slow", "echo@1",
                          lambda req: time.sleep(5) or req)
    t0 = time.monotonic()
    with pytest.raises(Timeout):
        bus.call("/s/slow", {"value": 1}, timeout_s=0.1)
    assert time.monotonic() - t0 < 2.0


def test_service_handler_error_propagates(stack):
    bus = make_bus(stack)

    def boom(req):
        raise ValueError("declared failure")

    bus.advertise_service("/s/boom", "echo@1", boom)
    with pytest.raises(HandlerError) as exc:
        bus.call("/s/boom", {"value": 1})
    assert isinstance(exc.value.cause, ValueError)


def test_call_on_topic_kind_is_unknown_interface(stack):
    bus = make_bus(stack)
    bus.create_topic("/t/ping", "ping@1")
    with pytest.raises(UnknownInterface):
        bus.call("/t/ping", {"value": 1})


# ---------------------------------------------------------------------------
# actions

def immediate_success_server(ctx):
    ctx.succeed({"value": ctx.goal["value"]})


def test_action_minimal_lifecycle(stack):
    bus = make_bus(stack)
    bus.advertise_action("/a/quick", "goal@1", immediate_success_server)
    handle = bus.send_goal("/a/quick", {"value": 1})
    assert [s.value for s, _ in handle.history] == \
        ["pending", "active", "succeeded"]
    assert handle.result == {"value": 1}


def test_cancel_during_active_stops_feedback(stack):
    bus = make_bus(stack)

    def server(ctx):
        timer = stack.scheduler.call_every(
            0.1, lambda: ctx.publish_feedback({"value": 0}))

        def on_cancel(c, reason):
            timer.cancel()
            if reason == "cancel":
                c.canceled()

        ctx.on_cancel = on_cancel

    bus.advertise_action("/a/stream", "goal@1", server)
    handle = bus.send_goal("/a/stream", {"value": 1})
    stack.advance(0.55)
    n_before = len(handle.feedback)
    assert n_before >= 5
    bus.cancel_goal(handle)
    assert handle.status == GoalStatus.CANCELED
    stack.advance(1.0)
    assert len(handle.feedback) == n_before


def test_feedback_after_terminal_is_dropped(stack):
    bus = make_bus(stack)
    box = {}

    def server(ctx):
        box["ctx"] = ctx
        ctx.succeed(None)

    bus.advertise_action("/a/done", "goal@1", server)
    handle = bus.send_goal("/a/done", {"value": 1})
    assert not box["ctx"].publish_feedback({"value": 9})
    assert handle.feedback == []


def test_preempt_policy_first_goal_preempted(stack):
    bus = make_bus(stack)
    ctxs = []
    bus.advertise_action("/a/one", "goal@1", ctxs.append, policy="preempt")
    h1 = bus.send_goal("/a/one", {"value": 1})
    h2 = bus.send_goal("/a/one", {"value": 2})
    assert h1.status == GoalStatus.PREEMPTED
    assert h2.status == GoalStatus.ACTIVE
    ctxs[1].succeed(None)
    assert h2.status == GoalStatus.SUCCEEDED
    # exactly one terminal each
    assert [s for s, _ in h1.history].count(GoalStatus.PREEMPTED) == 1


def test_queue_policy_runs_goals_in_order(stack):
    bus = make_bus(stack)
    ctxs = []
    bus.advertise_action("/a/q", "goal@1", ctxs.append, policy="queue")
    h1 = bus.send_goal("/a/q", {"value": 1})
    h2 = bus.send_goal("/a/q", {"value": 2})
    assert h1.status == GoalStatus.ACTIVE
    assert h2.status == GoalStatus.PENDING
    ctxs[0].succeed(None)
    assert h2.status == GoalStatus.ACTIVE
    ctxs[1].succeed(None)
    assert [h1.status, h2.status] == [GoalStatus.SUCCEEDED,
                                      GoalStatus.SUCCEEDED]


def test_reject_policy_raises_server_busy(stack):
    bus = make_bus(stack)
    bus.advertise_action("/a/r", "goal@1", lambda ctx: None, policy="reject")
    bus.send_goal("/a/r", {"value": 1})
    with pytest.raises(ServerBusy):
        bus.send_goal("/a/r", {"value": 2})


def test_cancel_queued_goal_skips_activation(stack):
    bus = make_bus(stack)
    activated = []
    bus.advertise_action("/a/q2", "goal@1", activated.append, policy="queue")
    bus.send_goal("/a/q2", {"value": 1})
    h2 = bus.send_goal("/a/q2", {"value": 2})
    bus.cancel_goal(h2)
    assert h2.status == GoalStatus.CANCELED
    assert [s.value for s, _ in h2.history] == ["pending", "canceled"]
    assert len(activated) == 1


def test_send_goal_on_service_kind_raises(stack):
    bus = make_bus(stack)
    bus.advertise_service("/s/echo", "echo@1", lambda r: r)
    with pytest.raises(UnknownInterface):
        bus.send_goal("/s/echo", {"value": 1})


# derived: scripted-server oracle enumerating legal lifecycle traces
LEGAL_TRACES = {
    ("pending", "active", "succeeded"),
    ("pending", "active", "canceled"),
    ("pending", "active", "aborted"),
    ("pending", "active", "preempted"),
    ("pending", "canceled"),
}


def scripted_server_factory(stack, rng, records):
    """Server that follows a random script of feedback/terminal steps over
    virtual timers."""

    def server(ctx):
        steps = rng.randint(0, 4)
        terminal = rng.choice(["succeed", "abort", "linger"])
        timers = []
        for i in range(steps):
            timers.append(stack.scheduler.call_later(
                0.01 * (i + 1), lambda i=i: ctx.publish_feedback({"value": i})))

        def finish():
            if terminal == "succeed":
                ctx.succeed(None)
            elif terminal == "abort":
                ctx.abort("scripted")

        timers.append(stack.scheduler.call_later(0.01 * (steps + 1), finish))

        def on_cancel(c, reason):
            for t in timers:
                t.cancel()
            if reason == "cancel":
                c.canceled()

        ctx.on_cancel = on_cancel
        records.append(ctx)

    return server


def test_randomized_lifecycles_follow_legal_traces(stack):
    bus = make_bus(stack)
    rng = random.Random(1234)
    records = []
    bus.advertise_action("/a/rand", "goal@1",
                         scripted_server_factory(stack, rng, records),
                         policy="preempt")
    handles = []
    for i in range(300):
        handle = bus.send_goal("/a/rand", {"value": i})
        handles.append(handle)
        if rng.random() < 0.4:
            stack.scheduler.call_later(rng.random() * 0.06,
                                       lambda h=handle: bus.cancel_goal(h))
        stack.advance(rng.random() * 0.08)
    stack.advance(1.0)
    for handle in handles:
        trace = tuple(s.value for s, _ in handle.history)
        assert trace in LEGAL_TRACES, trace
        terminals = [s for s, _ in handle.history
                     if s.value in ("succeeded", "canceled", "aborted",
                                    "preempted")]
        assert len(terminals) == 1


# ---------------------------------------------------------------------------
# registry

def _snap(*entries):
    return RegistrySnapshot(entries=tuple(
        RegistryEntry(*e) for e in entries))


def test_registry_diff_reflexive():
    snap = _snap(("/m/a", "topic", "x@1"), ("/m/b", "service", "y@1"))
    assert registry_diff(snap, snap) == []


def test_registry_diff_missing_entry():
    a = _snap(("/m/a", "topic", "x@1"), ("/m/b", "topic", "x@1"))
    b = _snap(("/m/a", "topic", "x@1"))
    diffs = registry_diff(a, b)
    assert len(diffs) == 1
    assert diffs[0].kind == "missing" and diffs[0].path == "/m/b"


def test_registry_diff_schema_mismatch():
    a = _snap(("/m/a", "topic", "x@1"))
    b = _snap(("/m/a", "topic", "x@2"))
    diffs = registry_diff(a, b)
    assert [d.kind for d in diffs] == ["schema_mismatch"]


entry_strategy = st.tuples(
    st.sampled_from(["/m/a", "/m/b", "/m/c", "/m/d"]),
    st.sampled_from(["topic", "service", "action"]),
    st.sampled_from(["x@1", "x@2", "y@1"]),
)


@given(st.lists(entry_strategy, max_size=6, unique_by=lambda e: (e[0], e[1])),
       st.lists(entry_strategy, max_size=6, unique_by=lambda e: (e[0], e[1])))
@settings(max_examples=200, deadline=None)
def test_registry_equivalence_is_symmetric(ea, eb):
    a, b = _snap(*ea), _snap(*eb)
    assert (registry_diff(a, b) == []) == (registry_diff(b, a) == [])


def test_registry_export_round_trip(stack):
    bus = make_bus(stack)
    bus.create_topic("/m/a", "ping@1")
    bus.advertise_service("/m/b", "echo@1", lambda r: r)
    snap = bus.registry_snapshot()
    again = RegistrySnapshot.from_json(snap.to_json())
    assert registry_diff(snap, again) == []
