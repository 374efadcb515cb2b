"""Perception detectors: radar presence hysteresis and tap-vs-hold touch.

The presence detector smooths radar energy with an EMA and uses two
thresholds plus a dwell so that energy wobbling between them cannot
produce event chatter. The touch classifier separates brief taps from
sustained holds, with a dead zone between them for ambiguous contacts.
"""

from mbot.clock import s_to_ns
from mbot.perception import DetectorConfig, PresenceDetector, TouchClassifier

cfg = DetectorConfig()
print(f"thresholds: enter above {cfg.t_hi}, leave below {cfg.t_lo} "
      f"for {cfg.dwell_s}s; tap <= {cfg.tap_max_s}s, hold >= {cfg.hold_s}s")

# --- presence ---------------------------------------------------------------
detector = PresenceDetector(cfg)
trace = ([1.0] * 8            # someone walks up
         + [0.35, 0.55] * 10  # energy wobbles between the thresholds
         + [0.0] * 30)        # they walk away; dwell delays the exit

print("\nradar trace at 10 Hz:")
for i, energy in enumerate(trace):
    event = detector.update(energy, s_to_ns(i * 0.1))
    if event:
        print(f"  t={event.t_ns / 1e9:4.1f}s  {event.kind.upper():8s} "
              f"(ema={event.energy_ema:.3f})")
print(f"  final: present={detector.state.present}")

# --- touch -------------------------------------------------------------------
classifier = TouchClassifier(cfg)
contacts = [(0.0, 0.2, "a quick tap"),
            (2.0, 0.7, "ambiguous poke (dead zone)"),
            (5.0, 1.8, "a sustained hold")]

print("\ncontact episodes:")
for start, duration, label in contacts:
    events = list(classifier.update("shell", True, s_to_ns(start)))
    if duration >= cfg.hold_s:
        # the node arms a timer at exactly press + hold threshold
        events += classifier.poll(s_to_ns(start + cfg.hold_s))
    events += classifier.update("shell", False, s_to_ns(start + duration))
    described = [f"{e.kind}@{e.t_ns / 1e9:.1f}s" for e in events] or ["nothing"]
    print(f"  {label:28s} ({duration}s) -> {', '.join(described)}")
