// Canvas rendering of the arena and telemetry panels. Pure drawing from the
// view; one render per received frame (the server clock drives the UI).

import type { SessionView } from "./view.js";

export const WORLD_HALF_CM = 16; // world window [-16, 16] cm in both axes

const COLORS = {
  background: "#10141a",
  grid: "#1d2530",
  target: "#e0a63c",
  targetHit: "#43c96e",
  avatar: "#5ab8f5",
  text: "#d7e3f0",
  dim: "#77869a",
};

export class ArenaRenderer {
  private ctx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
  }

  private toPx(xCm: number, yCm: number): [number, number] {
    const scale = this.canvas.width / (2 * WORLD_HALF_CM);
    return [
      this.canvas.width / 2 + xCm * scale,
      this.canvas.height / 2 - yCm * scale, // world y is up
    ];
  }

  render(view: SessionView): void {
    const { ctx, canvas } = this;
    const frame = view.frame;
    ctx.fillStyle = COLORS.background;
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    this.drawGrid();
    if (!frame) {
      ctx.fillStyle = COLORS.dim;
      ctx.font = "16px system-ui";
      ctx.textAlign = "center";
      ctx.fillText("waiting for session frames...", canvas.width / 2, canvas.height / 2);
      return;
    }
    const scale = canvas.width / (2 * WORLD_HALF_CM);

    // target square, side in cm
    const [tx, ty] = this.toPx(frame.target_x, frame.target_y);
    const side = frame.target_side * scale;
    const holding = frame.hold_ticks > 0;
    ctx.strokeStyle = holding ? COLORS.targetHit : COLORS.target;
    ctx.lineWidth = holding ? 3 : 2;
    ctx.strokeRect(tx - side / 2, ty - side / 2, side, side);

    // avatar
    const [ax, ay] = this.toPx(frame.x, frame.y);
    ctx.fillStyle = COLORS.avatar;
    ctx.beginPath();
    ctx.arc(ax, ay, 5, 0, 2 * Math.PI);
    ctx.fill();

    if (view.flash) {
      ctx.fillStyle =
        view.flash.kind === "success" ? "rgba(67,201,110,0.18)" : "rgba(224,82,82,0.18)";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
    }
  }

  private drawGrid(): void {
    const { ctx, canvas } = this;
    ctx.strokeStyle = COLORS.grid;
    ctx.lineWidth = 1;
    const step = canvas.width / 8;
    for (let i = 1; i < 8; i++) {
      ctx.beginPath();
      ctx.moveTo(i * step, 0);
      ctx.lineTo(i * step, canvas.height);
      ctx.stroke();
      ctx.beginPath();
      ctx.moveTo(0, i * step);
      ctx.lineTo(canvas.width, i * step);
      ctx.stroke();
    }
  }
}

export interface PanelElements {
  mode: HTMLElement;
  trial: HTMLElement;
  clock: HTMLElement;
  holdBar: HTMLElement;
  tally: HTMLElement;
  status: HTMLElement;
  banner: HTMLElement;
  history: HTMLCanvasElement;
}

export function renderPanels(view: SessionView, els: PanelElements, timeoutS = 13): void {
  const frame = view.frame;
  els.mode.textContent = frame ? frame.mode : "-";
  els.trial.textContent = frame ? `trial ${frame.trial + 1}` : "trial -";
  const clock = view.trialClockS();
  els.clock.textContent = `${clock.toFixed(1)} s / ${timeoutS.toFixed(1)} s`;
  els.clock.classList.toggle("timeout", !!frame && frame.phase === "failed");
  els.holdBar.style.width = `${(view.holdFraction() * 100).toFixed(0)}%`;
  const rate = view.recentSuccessRate();
  els.tally.textContent =
    `${view.successTally} ok` + (rate === null ? "" : ` (${(rate * 100).toFixed(0)}% of last ${view.trialHistory.length})`);
  els.status.textContent = `${view.status}${view.role ? " | " + view.role : ""}`;
  els.banner.textContent = view.banner ?? "";
  els.banner.style.display = view.banner ? "block" : "none";
  renderHistory(view, els.history);
}

function renderHistory(view: SessionView, canvas: HTMLCanvasElement): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const history = view.trialHistory;
  if (history.length === 0) return;
  const maxDur = Math.max(...history.map((t) => t.durationS), 1);
  const barW = canvas.width / 60;
  history.forEach((t, i) => {
    const h = Math.max(2, (t.durationS / maxDur) * (canvas.height - 2));
    ctx.fillStyle = t.succeeded ? "#43c96e" : "#e05252";
    ctx.fillRect(i * barW, canvas.height - h, Math.max(1, barW - 1), h);
  });
}
