"""mbot: hardware-free social robot runtime.

A topic/service/action message bus, a five-joint kinematic simulator with
a timeline-based expression engine, perception detectors, storytelling
and coaching interaction templates, session logging with deterministic
replay, and WebSocket telemetry for a browser digital twin. The simulated
backend and the bundled hardware stub register byte-identical interface
sets, so behavior code transfers between them unchanged.
"""

from .bus import MessageBus, registry_diff
from .clock import RealClock, Scheduler, VirtualClock
from .model import JointId, RobotDescription

__version__ = "0.1.0"

__all__ = [
    "MessageBus", "registry_diff", "RealClock", "Scheduler", "VirtualClock",
    "JointId", "RobotDescription", "__version__",
]
