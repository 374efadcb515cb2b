"""One-way storytelling: a scripted narrative with synchronized gestures.

Each chunk couples narration (a speech action with a declared duration)
with cues that fire gesture timelines at offsets relative to the
utterance start. Under the virtual clock the whole story plays out
instantly with exact cue timestamps.
"""

from mbot.bus import MessageBus
from mbot.clock import Scheduler, VirtualClock
from mbot.interact import StoryRunner, StoryScript, TimelineLibrary
from mbot.model import RobotDescription
from mbot.sim import SimProvider

desc = RobotDescription.default()
clock = VirtualClock()
bus = MessageBus(clock, Scheduler(clock))
SimProvider(bus, desc).start()
library = TimelineLibrary.bundled(desc)

script = StoryScript.bundled_sample()
print(f"story '{script.id}': {len(script.chunks)} chunks")

runner = StoryRunner(bus, script, library,
                     on_feedback=lambda i: print(
                         f"\n[chunk {i}] t={clock.now_ns() / 1e9:5.1f}s  "
                         f"\"{script.chunks[i].text}\""))
runner.start()

# pause mid-story and resume: the interrupted chunk restarts
bus.scheduler.advance(7.0)
print(f"\n-- pausing at t={clock.now_ns() / 1e9:.1f}s "
      f"(state {runner.state.label()})")
runner.pause()
bus.scheduler.advance(3.0)
print(f"-- resuming at t={clock.now_ns() / 1e9:.1f}s")
runner.resume()

bus.scheduler.run_until(lambda: runner.finished, limit_s=120)
print(f"\nstory finished: {runner.state.label()}")
print("gesture cue dispatches (virtual time, exact):")
for t_ns, timeline_id in runner.dispatch_log:
    print(f"  t={t_ns / 1e9:5.1f}s  {timeline_id}")
