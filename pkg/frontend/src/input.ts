// Arrow-key joystick surrogate. Keys map to commands; messages go out on
// transitions only (hold = one message, the server keeps the command until
// replaced or released).

import type { ClientMessage, CommandName } from "./protocol.js";

const KEY_COMMANDS: Record<string, CommandName> = {
  ArrowUp: "Forward",
  ArrowRight: "Right",
  ArrowLeft: "Left",
};

export type SendFn = (msg: ClientMessage) => void;

export class KeyTracker {
  private held: string[] = [];
  private active: CommandName | null = null;
  private enabled = true;
  messagesSent = 0;

  constructor(private send: SendFn) {}

  // observers never send; the UI shows a hint instead
  setEnabled(enabled: boolean): void {
    this.enabled = enabled;
    if (!enabled) {
      this.held = [];
      this.active = null;
    }
  }

  get activeCommand(): CommandName | null {
    return this.active;
  }

  handlesKey(key: string): boolean {
    return key in KEY_COMMANDS;
  }

  keyDown(key: string): void {
    if (!this.enabled || !(key in KEY_COMMANDS)) return;
    if (!this.held.includes(key)) this.held.push(key);
    this.sync();
  }

  keyUp(key: string): void {
    if (!this.enabled || !(key in KEY_COMMANDS)) return;
    this.held = this.held.filter((k) => k !== key);
    this.sync();
  }

  // the most recently pressed key wins; no keys held means release (Stop)
  private sync(): void {
    const top = this.held[this.held.length - 1];
    const want: CommandName | null = top ? KEY_COMMANDS[top] : null;
    if (want === this.active) return;
    this.active = want;
    this.messagesSent += 1;
    this.send(want === null ? { type: "release" } : { type: "cmd", cmd: want });
  }
}
