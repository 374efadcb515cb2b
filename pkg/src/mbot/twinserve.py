"""WebSocket/HTTP server feeding the browser digital twin.

One port serves three things: the /twin WebSocket endpoint streaming
joint and face state as JSON text frames, GET /health returning the
health report, and the static twin UI assets when a directory is
configured. Joint state is forwarded at a decimated rate (default 30 Hz)
so the 50 Hz bus stream never floods the render loop.

Wire grammar (JSON text frames on /twin):
  server -> client:
    {"kind": "hello", "mode": ..., "description": {...}}
    {"kind": "mode", "mode": "sim_control" | "mirror"}
    {"kind": "joint_states", "t_mono": ns, "position": {...},
     "velocity": {...}}
    {"kind": "face_state", "expression": name}
    {"kind": "error", "reason": text}
  client -> server:
    {"kind": "set_joint", "joint": name, "target": radians}
      (sim_control mode only; targets are clamped server-side)
"""

from __future__ import annotations

import asyncio
import http
import json
import logging
import mimetypes
import threading
from pathlib import Path
from typing import Optional

from websockets.asyncio.server import serve
from websockets.datastructures import Headers
from websockets.http11 import Response

from . import logkit
from .bus import Envelope, MessageBus
from .model import RobotDescription

log = logging.getLogger(__name__)


def _http_response(status: int, content_type: str, body: bytes) -> Response:
    return Response(status, http.HTTPStatus(status).phrase, Headers([
        ("Content-Type", content_type),
        ("Content-Length", str(len(body))),
        ("Cache-Control", "no-store"),
    ]), body)


class TwinServer:
    """Bridges the bus to browser clients. Runs its own asyncio loop in a
    daemon thread; bus callbacks hop onto the loop via a latest-state cell,
    never blocking the publish path."""

    def __init__(self, bus: MessageBus, desc: RobotDescription,
                 mode: str = "sim_control", host: str = "127.0.0.1",
                 port: int = 8765, static_dir: Optional[str] = None,
                 forward_hz: float = 30.0):
        if mode not in ("sim_control", "mirror"):
            raise ValueError(f"unknown twin mode: {mode}")
        self.bus = bus
        self.desc = desc
        self.mode = mode
        self.host = host
        self.port = port
        self.static_dir = Path(static_dir) if static_dir else None
        self.forward_period = 1.0 / forward_hz
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._thread: Optional[threading.Thread] = None
        self._ready = threading.Event()
        self._stopping = threading.Event()
        self._clients: set = set()
        self._latest_joints: Optional[dict] = None
        self._latest_face: Optional[dict] = None
        self._joints_dirty = False
        self._subs = []
        self.bound_port: Optional[int] = None
        self.set_joint_frames = 0  # applied set_joint count, test-observable

    # -- lifecycle ---------------------------------------------------------

    def start(self, timeout_s: float = 5.0) -> "TwinServer":
        self._thread = threading.Thread(
            target=self._run_loop, name="mbot-twin", daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=timeout_s):
            raise RuntimeError("twin server failed to start")
        self._subs.append(self.bus.subscribe("/m/joint_states", self._on_joints))
        self._subs.append(self.bus.subscribe("/m/face_state", self._on_face))
        return self

    def stop(self) -> None:
        for sub in self._subs:
            sub.close()
        self._subs.clear()
        if self._loop is not None:
            self._stopping.set()
            self._loop.call_soon_threadsafe(lambda: None)
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def _run_loop(self) -> None:
        asyncio.run(self._main())

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        async with serve(self._handler, self.host, self.port,
                         process_request=self._process_request) as server:
            self.bound_port = server.sockets[0].getsockname()[1] \
                if server.sockets else self.port
            self._ready.set()
            forwarder = asyncio.ensure_future(self._forward())
            try:
                while not self._stopping.is_set():
                    await asyncio.sleep(0.05)
            finally:
                forwarder.cancel()

    # -- bus side ----------------------------------------------------------

    def _on_joints(self, env: Envelope) -> None:
        # latest-wins cell; the forwarder decimates to the display rate
        self._latest_joints = {
            "kind": "joint_states",
            "t_mono": env.payload["t_mono"],
            "position": env.payload["position"],
            "velocity": env.payload["velocity"],
        }
        self._joints_dirty = True

    def _on_face(self, env: Envelope) -> None:
        self._latest_face = {"kind": "face_state",
                             "expression": env.payload["expression"]}

    # -- websocket side -------------------------------------------------------

    async def _forward(self) -> None:
        last_face = None
        while True:
            await asyncio.sleep(self.forward_period)
            if not self._clients:
                continue
            frames = []
            if self._joints_dirty and self._latest_joints is not None:
                self._joints_dirty = False
                frames.append(json.dumps(self._latest_joints))
            if self._latest_face is not None and self._latest_face != last_face:
                last_face = self._latest_face
                frames.append(json.dumps(self._latest_face))
            if not frames:
                continue
            for ws in list(self._clients):
                for frame in frames:
                    try:
                        await ws.send(frame)
                    except Exception:
                        self._clients.discard(ws)
                        break

    async def _handler(self, ws) -> None:
        if ws.request.path != "/twin":
            await ws.close(code=1008, reason="unknown endpoint")
            return
        await ws.send(json.dumps({
            "kind": "hello",
            "mode": self.mode,
            "description": self.desc.to_dict(),
        }))
        if self._latest_face is not None:
            await ws.send(json.dumps(self._latest_face))
        if self._latest_joints is not None:
            await ws.send(json.dumps(self._latest_joints))
        self._clients.add(ws)
        try:
            async for raw in ws:
                reply = self._handle_frame(raw)
                if reply is not None:
                    await ws.send(json.dumps(reply))
        finally:
            self._clients.discard(ws)

    def _handle_frame(self, raw) -> Optional[dict]:
        try:
            msg = json.loads(raw)
            kind = msg["kind"]
        except (ValueError, TypeError, KeyError):
            return {"kind": "error", "reason": "malformed frame"}
        if kind == "set_joint":
            if self.mode != "sim_control":
                return {"kind": "error",
                        "reason": "set_joint rejected: mirror mode is read-only"}
            try:
                joint = str(msg["joint"])
                target = float(msg["target"])
                reply = self.bus.call("/m/set_joint_targets",
                                      {"targets": {joint: target}},
                                      timeout_s=2.0)
            except Exception as exc:
                return {"kind": "error", "reason": f"set_joint failed: {exc}"}
            self.set_joint_frames += 1
            return {"kind": "ack", "applied": reply["applied"]}
        return {"kind": "error", "reason": f"unknown frame kind: {kind!r}"}

    # -- plain http -------------------------------------------------------

    def _process_request(self, connection, request):
        path = request.path.split("?", 1)[0]
        if path == "/twin":
            return None  # proceed with the websocket upgrade
        if path == "/health":
            body = json.dumps(logkit.health(self.bus)).encode()
            return _http_response(200, "application/json", body)
        if self.static_dir is not None:
            rel = "index.html" if path == "/" else path.lstrip("/")
            target = (self.static_dir / rel).resolve()
            if target.is_file() and str(target).startswith(
                    str(self.static_dir.resolve())):
                ctype = mimetypes.guess_type(target.name)[0] or \
                    "application/octet-stream"
                return _http_response(200, ctype, target.read_bytes())
        return _http_response(404, "text/plain", b"not found\n")
