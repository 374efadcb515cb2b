"""Tour of the message bus: topics, services, actions.

Everything runs under a virtual clock, so the whole demo is instantaneous
and perfectly reproducible: run it twice, get the same timestamps.
"""

from mbot.bus import MessageBus, Schema
from mbot.clock import Scheduler, VirtualClock

clock = VirtualClock()
scheduler = Scheduler(clock)
bus = MessageBus(clock, scheduler)

# Interfaces are named and schema-tagged. The schema id (name@version) is
# what interface-equivalence checks compare across backends.
bus.register_schema(Schema("temperature", 1, (("celsius", "number"),)))
bus.register_schema(Schema("sum_request", 1, (("a", "number"), ("b", "number"))))
bus.register_schema(Schema("countdown", 1, (("start", "int"),)))

# --- topics: streaming, fire-and-forget -----------------------------------
bus.create_topic("/demo/temperature", "temperature@1")

bus.subscribe("/demo/temperature",
              lambda env: print(f"  subscriber saw {env.payload['celsius']}°C "
                                f"(seq {env.seq}, t={env.t_mono / 1e9:.1f}s)"))

pub = bus.create_publisher("/demo/temperature", "kitchen-sensor")
print("publishing three temperature samples:")
for value in (21.0, 21.5, 22.1):
    scheduler.advance(1.0)
    pub.publish({"celsius": value})

# --- services: synchronous request/reply -----------------------------------
bus.advertise_service("/demo/sum", "sum_request@1",
                      lambda req: {"total": req["a"] + req["b"]})
print("\ncalling /demo/sum:", bus.call("/demo/sum", {"a": 2, "b": 40}))

# --- actions: long-running, feedback, cancelable ---------------------------

def countdown_server(ctx):
    remaining = [ctx.goal["start"]]

    def tick():
        remaining[0] -= 1
        if remaining[0] <= 0:
            timer.cancel()
            ctx.succeed({"done": True})
        else:
            ctx.publish_feedback({"remaining": remaining[0]})

    timer = scheduler.call_every(1.0, tick, first_at_ns=clock.now_ns() + 10**9)

    def on_cancel(c, reason):
        timer.cancel()
        if reason == "cancel":
            c.canceled()

    ctx.on_cancel = on_cancel


bus.advertise_action("/demo/countdown", "countdown@1", countdown_server)

print("\nstarting a 5-step countdown, canceling after 2 steps:")
handle = bus.send_goal("/demo/countdown", {"start": 5})
handle.on_feedback(lambda env: print(f"  feedback: {env.payload}"))
scheduler.advance(2.5)
bus.cancel_goal(handle)
scheduler.advance(5.0)
print(f"  final status: {handle.status.value}")
print(f"  status history: {[(s.value, t / 1e9) for s, t in handle.history]}")
