import pytest

from mbot.bus import MessageBus
from mbot.clock import Scheduler, VirtualClock
from mbot.interact import TimelineLibrary
from mbot.model import RobotDescription


class VirtualStack:
    """Virtual-clock bus bundle for deterministic tests."""

    def __init__(self):
        self.clock = VirtualClock()
        self.scheduler = Scheduler(self.clock)
        self.bus = MessageBus(self.clock, self.scheduler)

    def advance(self, seconds):
        self.scheduler.advance(seconds)

    def run_until(self, predicate, limit_s=60.0):
        self.scheduler.run_until(predicate, limit_s=limit_s)


@pytest.fixture
def stack():
    return VirtualStack()


@pytest.fixture(scope="session")
def desc():
    return RobotDescription.default()


@pytest.fixture(scope="session")
def library(desc):
    return TimelineLibrary.bundled(desc)
