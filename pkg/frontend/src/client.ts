// WebSocket wiring: parse incoming messages into the view, push key
// transitions out, reconnect with backoff when the link drops.

import { parseServerMessage, type ClientMessage } from "./protocol.js";
import type { SessionView } from "./view.js";

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 8000;

export class LoopClient {
  private socket: WebSocket | null = null;
  private backoffMs = BACKOFF_START_MS;
  private closed = false;

  constructor(
    private url: string,
    private view: SessionView,
    private onUpdate: () => void,
  ) {}

  connect(): void {
    this.view.setStatus(this.socket === null ? "connecting" : "reconnecting");
    this.onUpdate();
    const socket = new WebSocket(this.url);
    this.socket = socket;

    socket.onopen = () => {
      this.backoffMs = BACKOFF_START_MS;
      this.view.setStatus("open");
      this.onUpdate();
    };

    socket.onmessage = (event: MessageEvent) => {
      const msg = parseServerMessage(String(event.data));
      if (msg === null) {
        this.view.markInvalidFrame();
      } else {
        this.view.apply(msg);
      }
      this.onUpdate();
    };

    socket.onclose = () => {
      this.view.setStatus("closed");
      this.onUpdate();
      if (!this.closed) this.scheduleReconnect();
    };

    socket.onerror = () => {
      socket.close();
    };
  }

  private scheduleReconnect(): void {
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
    setTimeout(() => {
      if (!this.closed) this.connect();
    }, delay);
  }

  send(msg: ClientMessage): void {
    if (this.socket && this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(JSON.stringify(msg));
    }
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
