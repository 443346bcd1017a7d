/** DOM wiring: one session per tab, answers by button, retry on failure. */

import { SessionApi } from "./api.js";
import { drawScene, Shape, shapeAt } from "./render.js";
import {
  applyAnswer,
  canAnswer,
  ConsoleState,
  freshState,
  guessBars,
  markError,
  markInFlight,
} from "./state.js";
import { AnswerLabel, PayloadError } from "./types.js";

const api = new SessionApi();
let state: ConsoleState | null = null;
let shapes: Shape[] = [];
let hover: Shape | null = null;
let retry: (() => void) | null = null;

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

const canvas = el<HTMLCanvasElement>("scene");
const ctx = canvas.getContext("2d")!;

function redraw(): void {
  if (!state) return;
  shapes = drawScene(ctx, state.view.scene, state.view.trace, hover);

  const target = state.view.scene.objects[state.view.target];
  el("target").textContent = target
    ? `target: #${state.view.target} (${target.size} ${target.color} ${target.category})`
    : "";
  el("question").textContent =
    state.view.question?.text ?? "— game over —";
  el("turn").textContent = `turn ${state.view.turn}`;
  const lam = state.view.trace?.lambda;
  el("lambda").textContent =
    lam == null ? "" : `fusion λ = ${lam.toFixed(3)}`;

  const live = canAnswer(state);
  for (const label of ["yes", "no", "na"]) {
    el<HTMLButtonElement>(`btn-${label}`).disabled = !live;
  }

  el("history").innerHTML = state.history
    .map(
      (h) =>
        `<li><span class="t">${h.turn}.</span> ${h.question} ` +
        `<b class="${h.answer}">${h.answer}</b></li>`,
    )
    .join("");

  const bars = guessBars(state.view);
  el("guess").innerHTML = bars
    .map(
      (b) =>
        `<div class="bar${b.predicted ? " predicted" : ""}">` +
        `<span class="label">#${b.index}</span>` +
        `<span class="fill" style="width:${(b.p * 100).toFixed(1)}%"></span>` +
        `<span class="pct">${(b.p * 100).toFixed(1)}%</span></div>`,
    )
    .join("");
  if (state.view.status === "finished") {
    const ok = state.view.success;
    el("verdict").textContent = ok ? "guessed it ✓" : "missed ✗";
    el("verdict").className = ok ? "good" : "bad";
  } else {
    el("verdict").textContent = "";
  }

  const banner = el("banner");
  banner.style.display = state.error ? "block" : "none";
  el("banner-text").textContent = state.error ?? "";
}

function fail(message: string, again: (() => void) | null): void {
  if (state) {
    state = markError(state, message);
  } else {
    el("banner").style.display = "block";
    el("banner-text").textContent = message;
  }
  retry = again;
  redraw();
}

async function startSession(): Promise<void> {
  const seedRaw = el<HTMLInputElement>("seed").value.trim();
  const targetRaw = el<HTMLInputElement>("pick").value.trim();
  const seed = seedRaw === "" ? undefined : Number(seedRaw);
  const target = targetRaw === "" ? undefined : Number(targetRaw);
  const go = () => void startSession();
  try {
    const payload = await api.create(seed, target);
    if (payload === null) return; // another request is on the wire
    state = freshState(payload);
    retry = null;
    redraw();
  } catch (err) {
    fail(
      err instanceof PayloadError
        ? `bad server payload: ${err.message}`
        : `could not reach the server: ${String(err)}`,
      err instanceof PayloadError ? null : go,
    );
  }
}

async function sendAnswer(label: AnswerLabel): Promise<void> {
  if (!state || !canAnswer(state)) return;
  const question = state.view.question?.text ?? "";
  const sid = state.view.session_id;
  const before = state;
  state = markInFlight(state);
  redraw();
  const go = () => {
    state = before;
    void sendAnswer(label);
  };
  try {
    const payload = await api.answer(sid, label);
    if (payload === null) return;
    state = applyAnswer(before, question, label, payload);
    redraw();
  } catch (err) {
    state = before;
    fail(
      err instanceof PayloadError
        ? `bad server payload: ${err.message}`
        : `answer did not go through: ${String(err)}`,
      err instanceof PayloadError ? null : go,
    );
  }
}

el("btn-start").addEventListener("click", () => void startSession());
for (const label of ["yes", "no", "na"] as AnswerLabel[]) {
  el(`btn-${label}`).addEventListener("click", () => void sendAnswer(label));
}
el("btn-retry").addEventListener("click", () => {
  const go = retry;
  retry = null;
  if (state) state = { ...state, error: null };
  if (go) go();
  else redraw();
});

canvas.addEventListener("mousemove", (ev) => {
  const box = canvas.getBoundingClientRect();
  const next = shapeAt(shapes, ev.clientX - box.left, ev.clientY - box.top);
  if (next !== hover) {
    hover = next;
    redraw();
  }
});
canvas.addEventListener("mouseleave", () => {
  hover = null;
  redraw();
});
