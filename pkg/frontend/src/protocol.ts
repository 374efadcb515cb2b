// TwinMessage wire grammar: JSON text frames over the /twin WebSocket.
// Mirrors the server's schema exactly; parseFrame refuses anything that
// does not match so a malformed frame can never corrupt UI state.

export type JointName =
  | 'base_yaw' | 'head_pitch' | 'head_yaw' | 'left_arm' | 'right_arm';

export const JOINT_ORDER: JointName[] =
  ['base_yaw', 'head_pitch', 'head_yaw', 'left_arm', 'right_arm'];

export interface JointSpec {
  min: number;
  max: number;
  v_max: number;
  parent: string;
  child: string;
  origin: [number, number, number];
  axis: [number, number, number];
  shape: 'box' | 'cylinder';
  size: [number, number, number];
}

export interface RobotDescription {
  name: string;
  joints: Record<JointName, JointSpec>;
  display: { width_px: number; height_px: number; expressions: string[] };
}

export type TwinMode = 'sim_control' | 'mirror';

export interface HelloFrame {
  kind: 'hello';
  mode: TwinMode;
  description: RobotDescription;
}

export interface ModeFrame {
  kind: 'mode';
  mode: TwinMode;
}

export interface JointStatesFrame {
  kind: 'joint_states';
  t_mono: number;
  position: Record<JointName, number>;
  velocity: Record<JointName, number>;
}

export interface FaceStateFrame {
  kind: 'face_state';
  expression: string;
}

export interface AckFrame {
  kind: 'ack';
  applied: Record<string, number>;
}

export interface ErrorFrame {
  kind: 'error';
  reason: string;
}

export type ServerFrame =
  | HelloFrame | ModeFrame | JointStatesFrame | FaceStateFrame
  | AckFrame | ErrorFrame;

export interface SetJointFrame {
  kind: 'set_joint';
  joint: JointName;
  target: number;
}

function isNumberMap(value: unknown): value is Record<string, number> {
  if (typeof value !== 'object' || value === null) return false;
  return Object.values(value).every((v) => typeof v === 'number');
}

/** Parse one incoming frame; null means the frame was malformed. */
export function parseFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== 'object' || data === null) return null;
  const frame = data as Record<string, unknown>;
  switch (frame.kind) {
    case 'hello':
      if (frame.mode !== 'sim_control' && frame.mode !== 'mirror') return null;
      if (typeof frame.description !== 'object' || frame.description === null) {
        return null;
      }
      return frame as unknown as HelloFrame;
    case 'mode':
      if (frame.mode !== 'sim_control' && frame.mode !== 'mirror') return null;
      return frame as unknown as ModeFrame;
    case 'joint_states':
      if (typeof frame.t_mono !== 'number') return null;
      if (!isNumberMap(frame.position) || !isNumberMap(frame.velocity)) {
        return null;
      }
      return frame as unknown as JointStatesFrame;
    case 'face_state':
      if (typeof frame.expression !== 'string') return null;
      return frame as unknown as FaceStateFrame;
    case 'ack':
      if (!isNumberMap(frame.applied)) return null;
      return frame as unknown as AckFrame;
    case 'error':
      if (typeof frame.reason !== 'string') return null;
      return frame as unknown as ErrorFrame;
    default:
      return null;
  }
}

export function setJointFrame(joint: JointName, target: number): string {
  const frame: SetJointFrame = { kind: 'set_joint', joint, target };
  return JSON.stringify(frame);
}
