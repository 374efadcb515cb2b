import type { HelloFrame, JointStatesFrame, RobotDescription } from '../src/protocol.js';

// mirrors assets/description.json on the server side
export const DESCRIPTION: RobotDescription = {
  name: 'm',
  joints: {
    base_yaw: {
      min: -2.09, max: 2.09, v_max: 1.57, parent: 'base_link',
      child: 'torso', origin: [0, 0, 0.04], axis: [0, 0, 1],
      shape: 'box', size: [0.16, 0.14, 0.2],
    },
    head_pitch: {
      min: -0.35, max: 0.61, v_max: 1.57, parent: 'torso',
      child: 'neck', origin: [0, 0, 0.21], axis: [0, 1, 0],
      shape: 'cylinder', size: [0.03, 0.03, 0.04],
    },
    head_yaw: {
      min: -1.05, max: 1.05, v_max: 1.57, parent: 'neck',
      child: 'head', origin: [0, 0, 0.03], axis: [0, 0, 1],
      shape: 'box', size: [0.18, 0.16, 0.12],
    },
    left_arm: {
      min: 0, max: 2.36, v_max: 3.14, parent: 'torso',
      child: 'left_arm_link', origin: [0, 0.095, 0.13], axis: [0, 1, 0],
      shape: 'box', size: [0.03, 0.02, 0.11],
    },
    right_arm: {
      min: 0, max: 2.36, v_max: 3.14, parent: 'torso',
      child: 'right_arm_link', origin: [0, -0.095, 0.13], axis: [0, -1, 0],
      shape: 'box', size: [0.03, 0.02, 0.11],
    },
  },
  display: {
    width_px: 320, height_px: 240,
    expressions: ['neutral', 'joy', 'wonder', 'thinking', 'calm',
                  'surprise', 'sad'],
  },
};

export function hello(mode: 'sim_control' | 'mirror'): HelloFrame {
  return { kind: 'hello', mode, description: DESCRIPTION };
}

export function jointStates(tMono: number,
                            headYaw = 0): JointStatesFrame {
  const zeros = {
    base_yaw: 0, head_pitch: 0, head_yaw: headYaw,
    left_arm: 0, right_arm: 0,
  };
  return {
    kind: 'joint_states', t_mono: tMono,
    position: { ...zeros }, velocity: {
      base_yaw: 0, head_pitch: 0, head_yaw: 0, left_arm: 0, right_arm: 0,
    },
  };
}
