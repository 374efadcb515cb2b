import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbot.clock import s_to_ns
from mbot.errors import InvalidDuration
from mbot.expression import (ActiveSet, Cue, CueSchedule, EmptyTimeline,
                             ExpressionEngine, Keyframe, Timeline,
                             TimelineError, Track, breathing_pattern,
                             schedule_cues)
from mbot.model import JointId, RobotDescription

from .oracles import SMOOTHSTEP_AT_QUARTER, linear_interp, ramp_mix, smoothstep_poly


def joint_tl(tl_id, joint, points, duration=None, priority=0, easing="linear"):
    kfs = tuple(Keyframe(t=t, targets={joint: v}, easing=easing)
                for t, v in points)
    dur = duration if duration is not None else points[-1][0]
    return Timeline(tl_id, [Track("joint", kfs)], dur, priority=priority)


# ---------------------------------------------------------------------------
# sampling

def test_linear_midpoint_exact():
    tl = joint_tl("lin", "head_yaw", [(0.0, 0.0), (1.0, 1.0)])
    assert tl.sample(0.5).joints[JointId.HEAD_YAW] == pytest.approx(0.5, abs=1e-9)


def test_smoothstep_quarter_matches_polynomial_oracle():
    assert smoothstep_poly(0.25) == SMOOTHSTEP_AT_QUARTER
    tl = joint_tl("ss", "head_yaw", [(0.0, 0.0), (1.0, 1.0)],
                  easing="smoothstep")
    got = tl.sample(0.25).joints[JointId.HEAD_YAW]
    assert got == pytest.approx(SMOOTHSTEP_AT_QUARTER, abs=1e-9)


def test_sample_clamps_past_duration():
    tl = joint_tl("c", "head_yaw", [(0.0, 0.2), (1.0, 0.8)], duration=2.0)
    assert tl.sample(7.0).joints[JointId.HEAD_YAW] == 0.8


def test_sample_before_first_keyframe_holds_first_value():
    tl = joint_tl("b", "head_yaw", [(1.0, 0.4), (2.0, 0.8)], duration=2.0)
    assert tl.sample(0.0).joints[JointId.HEAD_YAW] == 0.4


def test_hold_easing_steps_at_later_keyframe():
    tl = joint_tl("h", "head_yaw", [(0.0, 0.1), (1.0, 0.9)], easing="hold")
    assert tl.sample(0.999).joints[JointId.HEAD_YAW] == 0.1
    assert tl.sample(1.0).joints[JointId.HEAD_YAW] == 0.9


def test_face_track_switches_discretely():
    tl = Timeline("f", [Track("face", (
        Keyframe(0.0, "neutral", "hold"), Keyframe(1.0, "joy", "hold")))], 2.0)
    assert tl.sample(0.5).face == "neutral"
    assert tl.sample(1.0).face == "joy"
    assert tl.sample(1.7).face == "joy"


def test_empty_timeline_raises():
    tl = Timeline("empty", [], 1.0)
    with pytest.raises(EmptyTimeline):
        tl.sample(0.0)


def test_non_increasing_keyframes_rejected():
    with pytest.raises(TimelineError):
        Track("joint", (Keyframe(1.0, {"head_yaw": 0.1}),
                        Keyframe(1.0, {"head_yaw": 0.2})))


def test_duration_shorter_than_keyframes_rejected():
    with pytest.raises(TimelineError):
        joint_tl("bad", "head_yaw", [(0.0, 0.0), (2.0, 0.5)], duration=1.0)


def test_out_of_limit_target_fails_validation(desc):
    tl = joint_tl("hot", "head_yaw", [(0.0, 0.0), (1.0, 9.0)])
    with pytest.raises(TimelineError):
        tl.validate_against(desc)


def test_unknown_expression_fails_validation(desc):
    tl = Timeline("f", [Track("face", (Keyframe(0.0, "grimace", "hold"),))], 1.0)
    with pytest.raises(TimelineError):
        tl.validate_against(desc)


@given(st.floats(0, 5), st.floats(0, 5))
@settings(max_examples=100, deadline=None)
def test_sample_is_pure(t1, t2):
    tl = joint_tl("p", "head_yaw", [(0.0, -0.5), (2.0, 0.5)], duration=5.0)
    a = tl.sample(t1).joints[JointId.HEAD_YAW]
    b = tl.sample(t1).joints[JointId.HEAD_YAW]
    assert a == b
    if t1 == t2:
        assert a == tl.sample(t2).joints[JointId.HEAD_YAW]


# ---------------------------------------------------------------------------
# blending

HOLDS = {j: 0.0 for j in JointId}


def blend(active, t_s, holds=HOLDS):
    return active.blend(s_to_ns(t_s), holds, "neutral", 0.0)


def test_single_timeline_blend_equals_sample():
    active = ActiveSet()
    tl = joint_tl("solo", "head_yaw", [(0.0, 0.0), (2.0, 1.0)])
    active.start(tl, 0)
    for t in (0.0, 0.5, 1.3, 2.0):
        assert blend(active, t).joints[JointId.HEAD_YAW] == \
            tl.sample(t).joints[JointId.HEAD_YAW]


def test_disjoint_timelines_blend_to_union():
    active = ActiveSet()
    a = joint_tl("a", "head_yaw", [(0.0, 0.0), (2.0, 1.0)])
    b = joint_tl("b", "left_arm", [(0.0, 0.0), (2.0, 2.0)])
    active.start(a, 0)
    active.start(b, 0)
    out = blend(active, 1.0)
    assert out.joints[JointId.HEAD_YAW] == a.sample(1.0).joints[JointId.HEAD_YAW]
    assert out.joints[JointId.LEFT_ARM] == b.sample(1.0).joints[JointId.LEFT_ARM]


def test_preempt_midpoint_is_mean_of_old_and_new():
    # derived: compute both samples independently and mix at alpha = 0.5
    active = ActiveSet()
    old = joint_tl("old", "head_yaw", [(0.0, 0.2), (10.0, 0.2)])
    new = joint_tl("new", "head_yaw", [(0.0, 0.6), (10.0, 0.6)])
    active.start(old, 0)
    t0, ramp = 1.0, 0.3
    active.start(new, s_to_ns(t0), ramp_s=ramp)
    t_mid = t0 + ramp / 2
    old_v = old.sample(t_mid).joints[JointId.HEAD_YAW]
    new_v = new.sample(t_mid - t0).joints[JointId.HEAD_YAW]
    expected = ramp_mix(old_v, new_v, ramp / 2, ramp)
    assert expected == pytest.approx((0.2 + 0.6) / 2)
    got = blend(active, t_mid).joints[JointId.HEAD_YAW]
    assert got == pytest.approx(expected, abs=1e-12)


def test_preempt_ramp_zero_identical_pose_is_seamless():
    active = ActiveSet()
    a = joint_tl("a", "head_yaw", [(0.0, 0.4), (10.0, 0.4)])
    active.start(a, 0)
    before = blend(active, 1.0).joints[JointId.HEAD_YAW]
    b = joint_tl("b", "head_yaw", [(0.0, 0.4), (10.0, 0.4)])
    active.start(b, s_to_ns(1.0), ramp_s=0.0)
    after = blend(active, 1.0).joints[JointId.HEAD_YAW]
    assert before == after == 0.4


def test_preempt_idle_set_plays_from_first_keyframe():
    active = ActiveSet()
    tl = joint_tl("fresh", "head_yaw", [(0.0, 0.3), (1.0, 0.9)])
    active.start(tl, s_to_ns(5.0), ramp_s=0.25)
    assert blend(active, 5.0).joints[JointId.HEAD_YAW] == 0.3


def test_higher_priority_wins_conflict():
    active = ActiveSet()
    low = joint_tl("low", "head_yaw", [(0.0, 0.1), (10.0, 0.1)], priority=0)
    high = joint_tl("high", "head_yaw", [(0.0, 0.9), (10.0, 0.9)], priority=2)
    active.start(high, 0)
    active.start(low, s_to_ns(1.0), ramp_s=0.0)  # cannot displace high
    assert blend(active, 2.0).joints[JointId.HEAD_YAW] == 0.9


def test_equal_priority_later_start_wins():
    active = ActiveSet()
    first = joint_tl("first", "head_yaw", [(0.0, 0.2), (10.0, 0.2)])
    second = joint_tl("second", "head_yaw", [(0.0, 0.7), (10.0, 0.7)])
    active.start(first, 0)
    active.start(second, s_to_ns(1.0), ramp_s=0.0)
    assert blend(active, 2.0).joints[JointId.HEAD_YAW] == 0.7


def test_insertion_order_irrelevant_for_non_conflicting_equal_priority():
    a = joint_tl("a", "head_yaw", [(0.0, 0.0), (2.0, 1.0)])
    b = joint_tl("b", "left_arm", [(0.0, 0.0), (2.0, 2.0)])
    one, two = ActiveSet(), ActiveSet()
    one.start(a, 0)
    one.start(b, 0)
    two.start(b, 0)
    two.start(a, 0)
    s1 = blend(one, 1.0)
    s2 = blend(two, 1.0)
    assert s1.joints == s2.joints


def test_untouched_joints_hold_last_commanded():
    active = ActiveSet()
    tl = joint_tl("armonly", "left_arm", [(0.0, 0.0), (1.0, 1.0)])
    active.start(tl, 0)
    holds = dict(HOLDS)
    holds[JointId.HEAD_YAW] = 0.33
    out = blend(active, 0.5, holds)
    assert out.joints[JointId.HEAD_YAW] == 0.33


# ---------------------------------------------------------------------------
# engine continuity

def test_engine_continuity_over_random_preemptions(desc):
    # derived sweep: 1000 random preemption instants, output step never
    # exceeds v_max * dt (+ float headroom)
    rng = random.Random(2024)
    dt = 0.02
    violations = 0
    for trial in range(1000):
        engine = ExpressionEngine(desc)
        lim = desc.joints[JointId.HEAD_YAW]
        a = joint_tl("a", "head_yaw",
                     [(0.0, rng.uniform(lim.min_rad, lim.max_rad)),
                      (2.0, rng.uniform(lim.min_rad, lim.max_rad))])
        b = joint_tl("b", "head_yaw",
                     [(0.0, rng.uniform(lim.min_rad, lim.max_rad)),
                      (2.0, rng.uniform(lim.min_rad, lim.max_rad))])
        engine.start(a, 0)
        preempt_at = rng.uniform(0.1, 1.9)
        ramp = rng.choice([0.0, 0.1, 0.25, 0.5])
        started_b = False
        prev = None
        t = 0.0
        while t <= 2.5:
            if not started_b and t >= preempt_at:
                engine.start(b, s_to_ns(preempt_at), ramp_s=ramp)
                started_b = True
            out = engine.tick(s_to_ns(t), dt).joints
            if prev is not None:
                for j in JointId:
                    if abs(out[j] - prev[j]) > desc.joints[j].v_max * dt + 1e-9:
                        violations += 1
            prev = out
            t = round(t + dt, 10)
    assert violations == 0


def test_engine_output_stays_within_limits(desc):
    engine = ExpressionEngine(desc)
    tl = joint_tl("edge", "head_yaw", [(0.0, -1.05), (0.5, 1.05)])
    engine.start(tl, 0)
    t = 0.0
    while t <= 1.0:
        out = engine.tick(s_to_ns(t), 0.02).joints
        lim = desc.joints[JointId.HEAD_YAW]
        assert lim.min_rad <= out[JointId.HEAD_YAW] <= lim.max_rad
        t = round(t + 0.02, 10)


def test_engine_resyncs_to_manual_pose_when_idle(desc):
    engine = ExpressionEngine(desc)
    manual = {j: 0.0 for j in JointId}
    manual[JointId.HEAD_YAW] = 0.8
    tl = joint_tl("go", "head_yaw", [(0.0, 0.8), (1.0, 0.0)])
    engine.start(tl, 0, current_joints=manual)
    out = engine.tick(0, 0.02).joints
    assert out[JointId.HEAD_YAW] == pytest.approx(0.8)


# ---------------------------------------------------------------------------
# cue scheduling

def test_empty_cue_schedule_dispatches_nothing(stack):
    fired = []
    schedule_cues(CueSchedule(cues=()), 0, fired.append, stack.scheduler)
    stack.advance(5.0)
    assert fired == []


def test_cue_offset_zero_fires_at_utterance_start(stack):
    fired = []
    schedule_cues(CueSchedule(cues=(Cue(0.0, "x"),)), s_to_ns(1.0),
                  lambda tid: fired.append((tid, stack.clock.now_ns())),
                  stack.scheduler)
    stack.advance(2.0)
    assert fired == [("x", s_to_ns(1.0))]


def test_cue_dispatch_times_exact_under_virtual_clock(stack):
    fired = []
    cs = CueSchedule(cues=(Cue(0.5, "a"), Cue(1.0, "b"), Cue(1.5, "c")))
    schedule_cues(cs, s_to_ns(2.0),
                  lambda tid: fired.append((tid, stack.clock.now_ns())),
                  stack.scheduler)
    stack.advance(5.0)
    assert fired == [("a", s_to_ns(2.5)), ("b", s_to_ns(3.0)),
                     ("c", s_to_ns(3.5))]


def test_cue_group_cancel_stops_pending(stack):
    fired = []
    cs = CueSchedule(cues=(Cue(0.5, "a"), Cue(1.5, "b")))
    group = schedule_cues(cs, 0, fired.append, stack.scheduler)
    stack.advance(1.0)
    group.cancel()
    stack.advance(2.0)
    assert fired == ["a"]


def test_cue_offsets_validated_against_duration():
    cs = CueSchedule(cues=(Cue(3.0, "late"),))
    with pytest.raises(TimelineError):
        cs.validate_for(2.0, grace_s=0.5)
    cs2 = CueSchedule(cues=(Cue(2.4, "ok"),))
    cs2.validate_for(2.0, grace_s=0.5)


# ---------------------------------------------------------------------------
# breathing

def test_breathing_construction():
    tl = breathing_pattern(4.0, 6.0, 1)
    assert tl.duration == 10.0
    assert tl.sample(4.0).haptic == 1.0
    # the peak is unique on the tick grid
    peaks = [t / 10 for t in range(0, 101)
             if tl.sample(t / 10).haptic == 1.0]
    assert peaks == [4.0]


def test_breathing_three_cycles_duration():
    assert breathing_pattern(4.0, 6.0, 3).duration == 30.0


def test_breathing_linear_midpoint():
    tl = breathing_pattern(4.0, 6.0, 1)
    assert tl.sample(2.0).haptic == pytest.approx(0.5, abs=1e-12)
    assert tl.sample(2.0).haptic == pytest.approx(
        linear_interp(0.0, 1.0, 0.5), abs=1e-12)


def test_breathing_rejects_bad_arguments():
    with pytest.raises(InvalidDuration):
        breathing_pattern(0.0, 6.0, 1)
    with pytest.raises(InvalidDuration):
        breathing_pattern(4.0, -1.0, 1)
    with pytest.raises(InvalidDuration):
        breathing_pattern(4.0, 6.0, 0)


# random valid timelines never sample outside description limits
@st.composite
def valid_timeline(draw):
    desc = RobotDescription.default()
    joint = draw(st.sampled_from(list(JointId)))
    lim = desc.joints[joint]
    n = draw(st.integers(2, 6))
    times = sorted(draw(st.lists(
        st.floats(0.0, 10.0), min_size=n, max_size=n, unique=True)))
    kfs = tuple(
        Keyframe(t, {joint: draw(st.floats(lim.min_rad, lim.max_rad))},
                 easing=draw(st.sampled_from(["linear", "smoothstep", "hold"])))
        for t in times)
    return Timeline("rand", [Track("joint", kfs)], duration=times[-1] + 1.0), joint


@given(valid_timeline(), st.floats(0.0, 12.0))
@settings(max_examples=200, deadline=None)
def test_valid_timelines_sample_within_limits(tl_joint, t):
    tl, joint = tl_joint
    desc = RobotDescription.default()
    tl.validate_against(desc)
    value = tl.sample(t).joints[joint]
    lim = desc.joints[joint]
    assert lim.min_rad <= value <= lim.max_rad
