"""Expressive behavior as keyframe timelines.

Shows interpolation easings, priority blending, the preemption ramp that
keeps motion continuous when one behavior interrupts another, and the
haptic breathing pattern.
"""

from mbot.clock import s_to_ns
from mbot.expression import (ActiveSet, ExpressionEngine, Keyframe, Timeline,
                             Track, breathing_pattern)
from mbot.model import JointId, RobotDescription

desc = RobotDescription.default()

# --- interpolation -----------------------------------------------------------
sweep = Timeline("sweep", [Track("joint", (
    Keyframe(0.0, {"head_yaw": 0.0}),
    Keyframe(1.0, {"head_yaw": 1.0}, easing="smoothstep"),
))], duration=1.0)

print("smoothstep sweep 0 -> 1 rad over 1 s:")
for t in (0.0, 0.25, 0.5, 0.75, 1.0, 2.0):
    v = sweep.sample(t).joints[JointId.HEAD_YAW]
    print(f"  t={t:4.2f}s  head_yaw={v:.5f} rad"
          + ("   (clamped to final)" if t > 1.0 else ""))

# --- blending with priority and a preemption ramp ---------------------------
hold_left = Timeline("hold_left", [Track("joint", (
    Keyframe(0.0, {"head_yaw": 0.6}), Keyframe(10.0, {"head_yaw": 0.6})))],
    duration=10.0)
look_right = Timeline("look_right", [Track("joint", (
    Keyframe(0.0, {"head_yaw": -0.6}), Keyframe(10.0, {"head_yaw": -0.6})))],
    duration=10.0)

active = ActiveSet()
active.start(hold_left, 0)
active.start(look_right, s_to_ns(2.0), ramp_s=0.5)  # preempt with a ramp

holds = {j: 0.0 for j in JointId}
print("\npreemption at t=2.0 with a 0.5 s ramp (old 0.6 -> new -0.6):")
for t in (1.9, 2.0, 2.125, 2.25, 2.375, 2.5, 3.0):
    v = active.blend(s_to_ns(t), holds, "neutral", 0.0).joints[JointId.HEAD_YAW]
    print(f"  t={t:5.3f}s  head_yaw={v:+.4f} rad")

# --- the ticked engine adds a slew limiter ----------------------------------
engine = ExpressionEngine(desc)
jump = Timeline("jump", [Track("joint", (
    Keyframe(0.0, {"head_yaw": 0.0}),
    Keyframe(0.1, {"head_yaw": 1.0}),   # 10 rad/s requested...
))], duration=0.1)
engine.start(jump, 0)
print("\na timeline asking for 10 rad/s is slew-limited to v_max"
      f" ({desc.joints[JointId.HEAD_YAW].v_max} rad/s):")
t, dt = 0.0, 0.02
prev = engine.desc.rest_pose()[JointId.HEAD_YAW]
for _ in range(5):
    out = engine.tick(s_to_ns(t), dt).joints[JointId.HEAD_YAW]
    print(f"  t={t:4.2f}s  commanded={out:.4f}  step={out - prev:+.4f}")
    prev, t = out, round(t + dt, 10)

# --- breathing pattern for the vibro-tactile channel -------------------------
breath = breathing_pattern(inhale_s=4.0, exhale_s=6.0, cycles=2)
print(f"\nbreathing pattern: duration {breath.duration} s, amplitude curve:")
for t in (0, 2, 4, 7, 10, 14, 20):
    print(f"  t={t:4.1f}s  amplitude={breath.sample(t).haptic:.2f}")
