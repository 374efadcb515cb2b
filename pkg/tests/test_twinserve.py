import json
import time
import urllib.request

import pytest
from websockets.sync.client import connect

from mbot.bus import MessageBus
from mbot.model import JointId
from mbot.sim import SimProvider
from mbot.twinserve import TwinServer


@pytest.fixture
def live_sim(desc):
    """Real-clock sim with a twin server on an ephemeral port."""
    bus = MessageBus()
    provider = SimProvider(bus, desc).start()
    bus.scheduler.start()
    server = TwinServer(bus, desc, mode="sim_control", port=0).start()
    yield bus, provider, server
    server.stop()
    bus.scheduler.stop()


@pytest.fixture
def mirror_sim(desc):
    bus = MessageBus()
    provider = SimProvider(bus, desc).start()
    bus.scheduler.start()
    server = TwinServer(bus, desc, mode="mirror", port=0).start()
    yield bus, provider, server
    server.stop()
    bus.scheduler.stop()


def recv_json(ws, timeout=5.0):
    return json.loads(ws.recv(timeout=timeout))


def recv_until(ws, kind, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        msg = recv_json(ws, timeout=deadline - time.monotonic())
        if msg["kind"] == kind:
            return msg
    raise TimeoutError(f"no {kind} frame within {timeout}s")


def test_hello_carries_description_and_mode(live_sim, desc):
    _, _, server = live_sim
    with connect(f"ws://127.0.0.1:{server.bound_port}/twin") as ws:
        hello = recv_json(ws)
        assert hello["kind"] == "hello"
        assert hello["mode"] == "sim_control"
        assert hello["description"] == desc.to_dict()
        joints = hello["description"]["joints"]
        assert joints["head_yaw"]["min"] == desc.joints[JointId.HEAD_YAW].min_rad
        assert joints["head_yaw"]["max"] == desc.joints[JointId.HEAD_YAW].max_rad


def test_joint_states_stream_to_client(live_sim):
    _, _, server = live_sim
    with connect(f"ws://127.0.0.1:{server.bound_port}/twin") as ws:
        recv_json(ws)  # hello
        frame = recv_until(ws, "joint_states")
        assert set(frame["position"]) == {j.value for j in JointId}
        assert "t_mono" in frame


def test_set_joint_applies_clamped_target(live_sim, desc):
    _, provider, server = live_sim
    with connect(f"ws://127.0.0.1:{server.bound_port}/twin") as ws:
        recv_json(ws)
        ws.send(json.dumps({"kind": "set_joint", "joint": "head_yaw",
                            "target": 99.0}))
        ack = recv_until(ws, "ack")
        lim = desc.joints[JointId.HEAD_YAW]
        assert ack["applied"]["head_yaw"] == lim.max_rad
        assert provider.servos[JointId.HEAD_YAW].target == lim.max_rad
        assert server.set_joint_frames == 1


def test_set_joint_rejected_in_mirror_mode(mirror_sim, desc):
    _, provider, server = mirror_sim
    with connect(f"ws://127.0.0.1:{server.bound_port}/twin") as ws:
        hello = recv_json(ws)
        assert hello["mode"] == "mirror"
        before = provider.servos[JointId.HEAD_YAW].target
        ws.send(json.dumps({"kind": "set_joint", "joint": "head_yaw",
                            "target": 0.5}))
        err = recv_until(ws, "error")
        assert "read-only" in err["reason"]
        assert provider.servos[JointId.HEAD_YAW].target == before
        assert server.set_joint_frames == 0


def test_malformed_frame_yields_error_and_session_survives(live_sim):
    _, _, server = live_sim
    with connect(f"ws://127.0.0.1:{server.bound_port}/twin") as ws:
        recv_json(ws)
        ws.send("this is not json{")
        err = recv_until(ws, "error")
        assert "malformed" in err["reason"]
        ws.send(json.dumps({"kind": "set_joint", "joint": "head_yaw",
                            "target": 0.1}))
        assert recv_until(ws, "ack")["applied"]["head_yaw"] == \
            pytest.approx(0.1)


def test_health_endpoint_over_http(live_sim):
    _, _, server = live_sim
    with urllib.request.urlopen(
            f"http://127.0.0.1:{server.bound_port}/health", timeout=5) as resp:
        assert resp.status == 200
        report = json.loads(resp.read())
    assert "/m/joint_states" in report["interfaces"]
    assert report["interfaces"]["/m/joint_states"]["kind"] == "topic"
    assert "sim" in report["nodes"]


def test_unknown_path_is_404(live_sim):
    _, _, server = live_sim
    try:
        urllib.request.urlopen(
            f"http://127.0.0.1:{server.bound_port}/nope", timeout=5)
        assert False, "expected 404"
    except urllib.error.HTTPError as exc:
        assert exc.code == 404


def test_forwarding_is_decimated(live_sim):
    _, _, server = live_sim
    with connect(f"ws://127.0.0.1:{server.bound_port}/twin") as ws:
        recv_json(ws)
        count = 0
        t0 = time.monotonic()
        while time.monotonic() - t0 < 1.0:
            try:
                msg = recv_json(ws, timeout=0.3)
            except TimeoutError:
                break
            if msg["kind"] == "joint_states":
                count += 1
        # 50 Hz on the bus, at most ~30 Hz on the wire
        assert 0 < count <= 38
