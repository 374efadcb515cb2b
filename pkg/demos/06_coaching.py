"""Two-way coaching: turn manager, phase tracking, mock generation.

A session walks greeting -> practice -> follow_up -> closing. The mock
generator is deterministic (phase-keyed templates referencing the latest
user turn), so the full transcript is reproducible byte for byte.
"""

from mbot.bus import MessageBus
from mbot.clock import Scheduler, VirtualClock
from mbot.interact import TimelineLibrary, bundled_turns, run_coach_day
from mbot.model import RobotDescription
from mbot.sim import SimProvider

desc = RobotDescription.default()
clock = VirtualClock()
bus = MessageBus(clock, Scheduler(clock))
SimProvider(bus, desc).start()
library = TimelineLibrary.bundled(desc)

day = 1
turns = bundled_turns()[day]
runner = run_coach_day(bus, library, day, turns)

trace = runner.trace()
print(f"coach day {day}: complete={runner.complete}")
print(f"phase at each user turn: {', '.join(trace['phases'])}\n")
for turn in trace["history"]:
    mark = "U" if turn["speaker"] == "user" else "R"
    print(f"  [{mark}] t={turn['t_mono'] / 1e9:5.1f}s  {turn['text']}")
