"""Platform configuration and stack assembly.

A PlatformConfig is one validated JSON document naming the robot
description, detector thresholds, tick rates, log root, and WebSocket
bind address. Its hash is recorded in every session's metadata so a log
can always be tied back to the exact configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .bus import MessageBus, canonical_json
from .clock import Clock, RealClock, Scheduler, VirtualClock
from .errors import MError
from .logkit import DATA_DIR_ENV
from .model import RobotDescription
from .perception import DetectorConfig, PerceptionNode
from .sim import HardwareStubProvider, Rates, Scenario, SimProvider

MODES = ("sim", "hardware-stub")


class ConfigError(MError):
    pass


@dataclass
class WsConfig:
    enabled: bool = True
    host: str = "127.0.0.1"
    port: int = 8765
    static_dir: Optional[str] = None
    forward_hz: float = 30.0


@dataclass
class PlatformConfig:
    mode: str = "sim"
    description_path: Optional[str] = None
    detectors: DetectorConfig = field(default_factory=DetectorConfig)
    rates: Rates = field(default_factory=Rates)
    log_root: Optional[str] = None
    ws: WsConfig = field(default_factory=WsConfig)
    seed: int = 42
    config_hash: str = ""

    @classmethod
    def from_dict(cls, data: dict) -> "PlatformConfig":
        mode = data.get("mode", "sim")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        det = data.get("detectors", {})
        rates = data.get("rates", {})
        ws = data.get("ws", {})
        try:
            cfg = cls(
                mode=mode,
                description_path=data.get("description"),
                detectors=DetectorConfig(
                    ema_alpha=det.get("ema_alpha", 0.3),
                    t_hi=det.get("t_hi", 0.6),
                    t_lo=det.get("t_lo", 0.3),
                    dwell_s=det.get("dwell", 2.0),
                    hold_s=det.get("hold", 1.0),
                    tap_max_s=det.get("tap_max", 0.4)),
                rates=Rates(
                    joints_hz=rates.get("joints_hz", 50.0),
                    radar_hz=rates.get("radar_hz", 10.0),
                    feedback_hz=rates.get("feedback_hz", 10.0)),
                log_root=data.get("log_root"),
                ws=WsConfig(
                    enabled=ws.get("enabled", True),
                    host=ws.get("host", "127.0.0.1"),
                    port=ws.get("port", 8765),
                    static_dir=ws.get("static_dir"),
                    forward_hz=ws.get("forward_hz", 30.0)),
                seed=int(data.get("seed", 42)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        if cfg.rates.joints_hz <= 0 or cfg.rates.radar_hz <= 0 \
                or cfg.rates.feedback_hz <= 0:
            raise ConfigError("tick rates must be positive")
        cfg.config_hash = hashlib.sha256(
            canonical_json(data).encode()).hexdigest()[:16]
        return cfg

    @classmethod
    def load(cls, path: str) -> "PlatformConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"unreadable config {path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def bundled(cls) -> "PlatformConfig":
        text = resources.files("mbot.assets").joinpath("config.json") \
            .read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    def load_description(self) -> RobotDescription:
        if self.description_path:
            return RobotDescription.load(self.description_path)
        return RobotDescription.default()

    def resolve_log_root(self) -> Path:
        if self.log_root:
            return Path(self.log_root)
        return Path(os.environ.get(DATA_DIR_ENV, "./m_data"))


class Platform:
    """Assembled stack: clock, scheduler, bus, backend provider, perception.
    The caller decides about recording, twin serving, and interactions."""

    def __init__(self, config: PlatformConfig, virtual_time: bool = False,
                 scenario: Optional[Scenario] = None):
        random.seed(config.seed)
        self.config = config
        self.desc = config.load_description()
        self.clock: Clock = VirtualClock() if virtual_time else RealClock()
        self.scheduler = Scheduler(self.clock)
        self.bus = MessageBus(self.clock, self.scheduler)
        if config.mode == "sim":
            self.provider = SimProvider(self.bus, self.desc,
                                        scenario=scenario, rates=config.rates)
        else:
            self.provider = HardwareStubProvider(self.bus, self.desc)
        self.provider.start()
        self.perception = PerceptionNode(self.bus, config.detectors).start()

    @property
    def virtual(self) -> bool:
        return self.clock.is_virtual

    def run_real_time(self) -> None:
        self.scheduler.start()

    def advance(self, seconds: float) -> None:
        self.scheduler.advance(seconds)

    def shutdown(self) -> None:
        self.perception.stop()
        self.provider.stop()
        if not self.virtual:
            self.scheduler.stop()

    def session_metadata(self) -> dict[str, str]:
        return {
            "robot_id": self.desc.name,
            "mode": self.config.mode,
            "config_hash": self.config.config_hash,
        }
