// Latest-state cell decoupling message receipt from the render loop.
// A burst of joint_states frames costs one assignment each; the renderer
// reads whatever is newest at display rate, so queues cannot grow.

import type { JointStatesFrame } from './protocol.js';

export const STALE_AFTER_MS = 1000;

export class LatestState {
  private latest: JointStatesFrame | null = null;
  private lastFrameAtMs: number | null = null;
  framesReceived = 0;

  update(frame: JointStatesFrame, nowMs: number): void {
    this.latest = frame;
    this.lastFrameAtMs = nowMs;
    this.framesReceived += 1;
  }

  /** Newest frame, or null before the first one arrives. */
  current(): JointStatesFrame | null {
    return this.latest;
  }

  /** True once no frame has arrived for STALE_AFTER_MS. */
  isStale(nowMs: number): boolean {
    if (this.lastFrameAtMs === null) return false;
    return nowMs - this.lastFrameAtMs > STALE_AFTER_MS;
  }

  reset(): void {
    this.latest = null;
    this.lastFrameAtMs = null;
  }
}
