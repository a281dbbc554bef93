// Wire types for the loop service WebSocket. The server is authoritative:
// the UI renders received frames and never simulates motion locally.

export type CommandName = "Forward" | "Right" | "Left" | "Stop";

export interface StateFrame {
  type: "state";
  session: string;
  mode: string;
  trial: number;
  tick: number;
  x: number;
  y: number;
  target_x: number;
  target_y: number;
  target_side: number;
  phase: "running" | "succeeded" | "failed";
  hold_ticks: number;
  cmd_exec: CommandName | null;
  cmd_dec: CommandName | null;
  cmd_oracle: CommandName | null;
  successes: number;
}

export interface RoleMessage {
  type: "role";
  role: "operator" | "observer";
}

export interface ErrorMessage {
  type: "error";
  msg: string;
}

export type ServerMessage = StateFrame | RoleMessage | ErrorMessage;

export type ClientMessage =
  | { type: "cmd"; cmd: CommandName }
  | { type: "release" }
  | { type: "control"; op: "start" | "pause" | "abort" };

const NUMERIC_FIELDS = [
  "trial", "tick", "x", "y", "target_x", "target_y", "target_side",
  "hold_ticks", "successes",
] as const;

const COMMAND_FIELDS = ["cmd_exec", "cmd_dec", "cmd_oracle"] as const;

const COMMAND_NAMES = new Set(["Forward", "Right", "Left", "Stop"]);
const PHASES = new Set(["running", "succeeded", "failed"]);

// Mirrors the server-side schema check: required fields with the right
// types; unknown extra fields are fine.
export function validateFrame(doc: unknown): doc is StateFrame {
  if (typeof doc !== "object" || doc === null) return false;
  const d = doc as Record<string, unknown>;
  if (d.type !== "state") return false;
  if (typeof d.session !== "string" || typeof d.mode !== "string") return false;
  if (typeof d.phase !== "string" || !PHASES.has(d.phase)) return false;
  for (const field of NUMERIC_FIELDS) {
    if (typeof d[field] !== "number" || Number.isNaN(d[field])) return false;
  }
  for (const field of COMMAND_FIELDS) {
    const v = d[field];
    if (v !== null && !(typeof v === "string" && COMMAND_NAMES.has(v))) return false;
  }
  return true;
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (d.type === "state") return validateFrame(d) ? (d as unknown as StateFrame) : null;
  if (d.type === "role" && (d.role === "operator" || d.role === "observer")) {
    return d as unknown as RoleMessage;
  }
  if (d.type === "error" && typeof d.msg === "string") return d as unknown as ErrorMessage;
  return null;
}

// The server address defaults to the page host; ?server=host:port overrides
// it so the static assets can be served from anywhere.
export function serverUrl(location: { search: string; host: string }): string {
  const params = new URLSearchParams(location.search);
  const host = params.get("server") ?? (location.host || "127.0.0.1:8090");
  return `ws://${host}/ws`;
}
