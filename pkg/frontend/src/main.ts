import { LoopClient } from "./client.js";
import { KeyTracker } from "./input.js";
import { serverUrl } from "./protocol.js";
import { ArenaRenderer, renderPanels, type PanelElements } from "./render.js";
import { SessionView } from "./view.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

const canvas = el("arena") as HTMLCanvasElement;
const panels: PanelElements = {
  mode: el("mode"),
  trial: el("trial"),
  clock: el("clock"),
  holdBar: el("hold-bar"),
  tally: el("tally"),
  status: el("status"),
  banner: el("banner"),
  history: el("history") as HTMLCanvasElement,
};

const view = new SessionView(10);
const renderer = new ArenaRenderer(canvas);

// render driven by incoming frames, not a local clock
const update = () => {
  renderer.render(view);
  renderPanels(view, panels);
  const operator = view.role === "operator";
  keys.setEnabled(operator);
  el("observer-hint").style.display = view.role === "observer" ? "block" : "none";
  (el("start") as HTMLButtonElement).disabled = !operator;
  (el("pause") as HTMLButtonElement).disabled = !operator;
  (el("abort") as HTMLButtonElement).disabled = !operator;
};

const client = new LoopClient(serverUrl(window.location), view, update);
const keys = new KeyTracker((msg) => client.send(msg));

window.addEventListener("keydown", (event) => {
  if (event.repeat) return;
  if (keys.handlesKey(event.key)) {
    event.preventDefault();
    keys.keyDown(event.key);
  }
});
window.addEventListener("keyup", (event) => {
  if (keys.handlesKey(event.key)) {
    event.preventDefault();
    keys.keyUp(event.key);
  }
});

el("start").addEventListener("click", () => client.send({ type: "control", op: "start" }));
el("pause").addEventListener("click", () => client.send({ type: "control", op: "pause" }));
el("abort").addEventListener("click", () => client.send({ type: "control", op: "abort" }));

client.connect();
update();
