// Mode gating and slider bounds. Every user input funnels through
// attemptSetJoint: in mirror mode it returns null (nothing is ever sent),
// in sim_control it returns a frame with the target clamped into the
// bounds that arrived in the hello description. Bounds are never
// hardcoded.

import type {
  HelloFrame, JointName, RobotDescription, TwinMode,
} from './protocol.js';
import { setJointFrame } from './protocol.js';

export interface SliderSpec {
  joint: JointName;
  min: number;
  max: number;
}

export class TwinController {
  mode: TwinMode = 'mirror';
  description: RobotDescription | null = null;
  /** Frames actually produced; mirror-mode inputs never increment this. */
  framesSent = 0;
  rejectedInputs = 0;

  applyHello(hello: HelloFrame): void {
    this.mode = hello.mode;
    this.description = hello.description;
  }

  setMode(mode: TwinMode): void {
    this.mode = mode;
  }

  get controlsEnabled(): boolean {
    return this.mode === 'sim_control' && this.description !== null;
  }

  /** Slider ranges sourced from the hello description, in joint order. */
  sliderSpecs(): SliderSpec[] {
    if (this.description === null) return [];
    return (Object.keys(this.description.joints) as JointName[]).map(
      (joint) => ({
        joint,
        min: this.description!.joints[joint].min,
        max: this.description!.joints[joint].max,
      }),
    );
  }

  /**
   * Turn a user input into a set_joint frame, or null when the input must
   * not produce traffic (mirror mode, unknown joint, missing hello).
   */
  attemptSetJoint(joint: JointName, value: number): string | null {
    if (!this.controlsEnabled || this.description === null) {
      this.rejectedInputs += 1;
      return null;
    }
    const spec = this.description.joints[joint];
    if (spec === undefined) {
      this.rejectedInputs += 1;
      return null;
    }
    const target = Math.min(spec.max, Math.max(spec.min, value));
    this.framesSent += 1;
    return setJointFrame(joint, target);
  }
}
