// WebSocket session with auto-retry. Reconnect delays back off
// exponentially and cap; the schedule is a pure function so it is
// testable without sockets.

import { parseFrame, type ServerFrame } from './protocol.js';

export const BACKOFF_BASE_MS = 500;
export const BACKOFF_CAP_MS = 8000;

export function backoffDelayMs(attempt: number): number {
  return Math.min(BACKOFF_CAP_MS, BACKOFF_BASE_MS * 2 ** attempt);
}

export interface TwinSocketHandlers {
  onFrame: (frame: ServerFrame) => void;
  onMalformed?: (raw: string) => void;
  onOpen?: () => void;
  onDisconnect?: () => void;
}

export class TwinSocket {
  private ws: WebSocket | null = null;
  private attempt = 0;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private url: string, private handlers: TwinSocketHandlers) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.handlers.onOpen?.();
    };
    ws.onmessage = (event) => {
      const frame = parseFrame(String(event.data));
      if (frame === null) {
        this.handlers.onMalformed?.(String(event.data));
        return;
      }
      this.handlers.onFrame(frame);
    };
    ws.onclose = () => {
      this.ws = null;
      this.handlers.onDisconnect?.();
      if (!this.closed) this.scheduleRetry();
    };
    ws.onerror = () => {
      // onclose follows; retry is handled there
    };
  }

  private scheduleRetry(): void {
    const delay = backoffDelayMs(this.attempt);
    this.attempt += 1;
    this.retryTimer = setTimeout(() => this.open(), delay);
  }

  send(frame: string): boolean {
    if (this.ws !== null && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(frame);
      return true;
    }
    return false;
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.ws?.close();
  }
}
