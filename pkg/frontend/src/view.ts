// Client-side session state: the latest good frame plus telemetry derived
// from the frame stream. No game rules live here.

import type { ServerMessage, StateFrame } from "./protocol.js";

export const TRIAL_HISTORY_LIMIT = 60;

export interface TrialResult {
  trial: number;
  durationS: number;
  succeeded: boolean;
}

export type ConnectionStatus = "connecting" | "open" | "closed" | "reconnecting";

export interface FlashState {
  kind: "success" | "failure";
  untilFrame: number;
}

export class SessionView {
  frame: StateFrame | null = null;
  role: "operator" | "observer" | null = null;
  status: ConnectionStatus = "connecting";
  banner: string | null = null;
  flash: FlashState | null = null;
  trialHistory: TrialResult[] = [];
  framesSeen = 0;
  private lastPhase: string | null = null;
  private lastTrial = -1;

  constructor(private tickHz = 10) {}

  get successTally(): number {
    return this.frame?.successes ?? 0;
  }

  setStatus(status: ConnectionStatus): void {
    this.status = status;
  }

  apply(msg: ServerMessage): void {
    if (msg.type === "role") {
      this.role = msg.role;
      return;
    }
    if (msg.type === "error") {
      this.banner = msg.msg;
      return;
    }
    this.applyFrame(msg);
  }

  // invalid payloads never reach here; on a bad frame the caller keeps the
  // last good one and raises the banner
  markInvalidFrame(): void {
    this.banner = "invalid frame received; showing last good state";
  }

  private applyFrame(frame: StateFrame): void {
    this.framesSeen += 1;
    const newTrial = frame.trial !== this.lastTrial;
    if (newTrial) this.lastPhase = null;
    if (frame.phase !== "running" && this.lastPhase !== frame.phase) {
      this.recordTrialEnd(frame);
      this.flash = {
        kind: frame.phase === "succeeded" ? "success" : "failure",
        untilFrame: this.framesSeen + 8,
      };
    }
    if (this.flash && this.framesSeen > this.flash.untilFrame) this.flash = null;
    this.lastPhase = frame.phase;
    this.lastTrial = frame.trial;
    this.frame = frame;
    this.banner = null;
  }

  private recordTrialEnd(frame: StateFrame): void {
    this.trialHistory.push({
      trial: frame.trial,
      durationS: frame.tick / this.tickHz,
      succeeded: frame.phase === "succeeded",
    });
    if (this.trialHistory.length > TRIAL_HISTORY_LIMIT) {
      this.trialHistory.splice(0, this.trialHistory.length - TRIAL_HISTORY_LIMIT);
    }
  }

  holdFraction(holdRequired = 15): number {
    if (!this.frame) return 0;
    return Math.min(1, this.frame.hold_ticks / holdRequired);
  }

  trialClockS(): number {
    return this.frame ? this.frame.tick / this.tickHz : 0;
  }

  meanRecentDurationS(): number | null {
    const done = this.trialHistory.filter((t) => t.succeeded);
    if (done.length === 0) return null;
    return done.reduce((acc, t) => acc + t.durationS, 0) / done.length;
  }

  recentSuccessRate(): number | null {
    if (this.trialHistory.length === 0) return null;
    const ok = this.trialHistory.filter((t) => t.succeeded).length;
    return ok / this.trialHistory.length;
  }
}
