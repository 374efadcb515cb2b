"""Digital-twin telemetry without a browser.

Starts the real WebSocket server against a live simulator and talks to it
with a plain client: receive the hello (robot description and mode),
watch decimated joint frames, command a joint through a bounded slider's
wire frame, and see the mirror-mode rejection.
"""

import json

from websockets.sync.client import connect

from mbot.bus import MessageBus
from mbot.model import RobotDescription
from mbot.sim import SimProvider
from mbot.twinserve import TwinServer

desc = RobotDescription.default()
bus = MessageBus()  # real clock: the server streams continuously
SimProvider(bus, desc).start()
bus.scheduler.start()
server = TwinServer(bus, desc, mode="sim_control", port=0).start()
url = f"ws://127.0.0.1:{server.bound_port}/twin"
print(f"twin endpoint: {url}")

with connect(url) as ws:
    hello = json.loads(ws.recv(timeout=5))
    print(f"\nhello: mode={hello['mode']}, "
          f"robot={hello['description']['name']}, "
          f"expressions={hello['description']['display']['expressions'][:3]}...")
    bounds = {name: (j['min'], j['max'])
              for name, j in hello['description']['joints'].items()}
    print("slider bounds from the description:")
    for name, (lo, hi) in bounds.items():
        print(f"  {name:11s} [{lo:+.2f}, {hi:+.2f}] rad")

    # command a joint; the server clamps and the sim slews toward it
    ws.send(json.dumps({"kind": "set_joint", "joint": "head_yaw",
                        "target": 9.0}))
    frames = 0
    last = None
    while frames < 30:
        msg = json.loads(ws.recv(timeout=5))
        if msg["kind"] == "ack":
            print(f"\nack: target clamped to {msg['applied']}")
        elif msg["kind"] == "joint_states":
            frames += 1
            last = msg
    print(f"after {frames} telemetry frames (max 30 Hz on the wire): "
          f"head_yaw={last['position']['head_yaw']:.3f} rad "
          f"(moving toward the clamped target)")

server.stop()

# mirror mode: the same endpoint, but read-only
mirror_bus = MessageBus()
SimProvider(mirror_bus, desc).start()
mirror_bus.scheduler.start()
mirror = TwinServer(mirror_bus, desc, mode="mirror", port=0).start()
with connect(f"ws://127.0.0.1:{mirror.bound_port}/twin") as ws:
    json.loads(ws.recv(timeout=5))  # hello
    ws.send(json.dumps({"kind": "set_joint", "joint": "head_yaw",
                        "target": 0.5}))
    while True:
        msg = json.loads(ws.recv(timeout=5))
        if msg["kind"] == "error":
            print(f"\nmirror mode: {msg['reason']}")
            break
print(f"server-side applied set_joint count in mirror mode: "
      f"{mirror.set_joint_frames}")
mirror.stop()
mirror_bus.scheduler.stop()
bus.scheduler.stop()
