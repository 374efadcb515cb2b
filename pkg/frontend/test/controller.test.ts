import { describe, expect, it } from 'vitest';

import { TwinController } from '../src/controller.js';
import type { JointName } from '../src/protocol.js';
import { DESCRIPTION, hello } from './fixtures.js';

const JOINTS = Object.keys(DESCRIPTION.joints) as JointName[];

describe('mirror mode', () => {
  it('sends zero set_joint frames under simulated user input', () => {
    const controller = new TwinController();
    controller.applyHello(hello('mirror'));
    const frames: string[] = [];
    // a burst of slider wiggling across every joint
    for (let i = 0; i < 200; i += 1) {
      const joint = JOINTS[i % JOINTS.length];
      const frame = controller.attemptSetJoint(joint, Math.sin(i) * 2);
      if (frame !== null) frames.push(frame);
    }
    expect(frames).toHaveLength(0);
    expect(controller.framesSent).toBe(0);
    expect(controller.rejectedInputs).toBe(200);
    expect(controller.controlsEnabled).toBe(false);
  });

  it('stays read-only after a mode frame flips it back', () => {
    const controller = new TwinController();
    controller.applyHello(hello('sim_control'));
    controller.setMode('mirror');
    expect(controller.attemptSetJoint('head_yaw', 0.2)).toBeNull();
    expect(controller.framesSent).toBe(0);
  });
});

describe('sim_control mode', () => {
  it('slider bounds equal the description limits from hello exactly', () => {
    const controller = new TwinController();
    controller.applyHello(hello('sim_control'));
    const specs = controller.sliderSpecs();
    expect(specs).toHaveLength(5);
    for (const spec of specs) {
      expect(spec.min).toBe(DESCRIPTION.joints[spec.joint].min);
      expect(spec.max).toBe(DESCRIPTION.joints[spec.joint].max);
    }
  });

  it('clamps targets into the hello bounds (no overshoot from the UI)', () => {
    const controller = new TwinController();
    controller.applyHello(hello('sim_control'));
    const atMax = controller.attemptSetJoint('head_yaw', 99);
    expect(JSON.parse(atMax!)).toEqual({
      kind: 'set_joint', joint: 'head_yaw',
      target: DESCRIPTION.joints.head_yaw.max,
    });
    const atMin = controller.attemptSetJoint('head_pitch', -99);
    expect(JSON.parse(atMin!).target).toBe(DESCRIPTION.joints.head_pitch.min);
    const inside = controller.attemptSetJoint('left_arm', 1.0);
    expect(JSON.parse(inside!).target).toBe(1.0);
    expect(controller.framesSent).toBe(3);
  });

  it('produces no frames before hello arrives', () => {
    const controller = new TwinController();
    controller.setMode('sim_control');
    expect(controller.attemptSetJoint('head_yaw', 0.1)).toBeNull();
    expect(controller.sliderSpecs()).toHaveLength(0);
  });
});
