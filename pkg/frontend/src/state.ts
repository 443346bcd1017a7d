/** Console state and the pure rules the contract tests pin down.
 *
 * Nothing in this module touches the DOM or the network, and nothing
 * does model math: rankings, bar sizes and gating are read straight off
 * the last server payload.
 */

import {
  AnswerLabel,
  PayloadError,
  SessionView,
  TraceJson,
} from "./types.js";

export interface HistoryEntry {
  turn: number;
  question: string;
  answer: AnswerLabel;
}

export interface ConsoleState {
  view: SessionView;
  history: HistoryEntry[];
  /** True while a request is on the wire; gates every button. */
  inFlight: boolean;
  /** Non-null after a network failure; the UI offers a retry. */
  error: string | null;
}

/** Number of attention ranks the overlay distinguishes. */
export const TOP_RANKS = 3;

/** Outline colors by attention rank, hottest first. */
export const RANK_COLORS = ["#d7263d", "#f46036", "#ffd23f"] as const;

function isNumberArray(v: unknown, n?: number): v is number[] {
  return (
    Array.isArray(v) &&
    (n === undefined || v.length === n) &&
    v.every((x) => typeof x === "number" && Number.isFinite(x))
  );
}

/** Structural check over a server payload; throws PayloadError. */
export function validateView(payload: unknown): SessionView {
  const p = payload as Record<string, unknown>;
  if (typeof p !== "object" || p === null) {
    throw new PayloadError("payload is not an object");
  }
  if (typeof p.session_id !== "string") {
    throw new PayloadError("missing session_id");
  }
  if (p.status !== "awaiting_answer" && p.status !== "finished") {
    throw new PayloadError(`unknown status ${String(p.status)}`);
  }
  const scene = p.scene as Record<string, unknown> | undefined;
  if (
    scene == null ||
    !Array.isArray(scene.objects) ||
    scene.objects.length !== scene.k
  ) {
    throw new PayloadError("malformed scene");
  }
  const k = scene.objects.length;
  if (p.status === "awaiting_answer") {
    const q = p.question as Record<string, unknown> | null | undefined;
    if (q == null || typeof q.text !== "string") {
      throw new PayloadError("awaiting_answer without a question");
    }
  }
  const trace = p.trace as Record<string, unknown> | undefined;
  if (trace !== undefined && !isNumberArray(trace.att, k)) {
    throw new PayloadError("trace.att does not cover the scene");
  }
  if (
    p.guess_distribution !== undefined &&
    !isNumberArray(p.guess_distribution, k)
  ) {
    throw new PayloadError("guess_distribution does not cover the scene");
  }
  return p as unknown as SessionView;
}

/** Indices of the top attention weights, hottest first.
 *
 * Before the first answer (turn 0, or no trace at all) there is nothing
 * to highlight and the ranking is empty.  Ties keep the lower index
 * first, matching a stable descending sort of the trace values.
 */
export function overlayRanking(trace: TraceJson | undefined): number[] {
  if (!trace || trace.turn === 0) {
    return [];
  }
  return trace.att
    .map((value, index) => ({ value, index }))
    .sort((a, b) => b.value - a.value || a.index - b.index)
    .slice(0, TOP_RANKS)
    .map((e) => e.index);
}

/** Answer buttons are live only while the server expects an answer. */
export function canAnswer(state: ConsoleState): boolean {
  return state.view.status === "awaiting_answer" && !state.inFlight;
}

export interface GuessBar {
  index: number;
  /** Raw server probability; the bar width in [0, 1]. */
  p: number;
  predicted: boolean;
}

/** The final guess panel, one bar per object, straight off the wire. */
export function guessBars(view: SessionView): GuessBar[] {
  const dist = view.guess_distribution;
  if (dist === undefined) {
    return [];
  }
  return dist.map((p, index) => ({
    index,
    p,
    predicted: index === view.predicted,
  }));
}

export function freshState(payload: unknown): ConsoleState {
  return {
    view: validateView(payload),
    history: [],
    inFlight: false,
    error: null,
  };
}

/** Fold the reply to an answer POST into the state.
 *
 * `question` is the text that was on screen when `answer` was clicked;
 * the reply's view only carries the *next* question.
 */
export function applyAnswer(
  state: ConsoleState,
  question: string,
  answer: AnswerLabel,
  payload: unknown,
): ConsoleState {
  const view = validateView(payload);
  return {
    view,
    history: [...state.history, { turn: view.turn, question, answer }],
    inFlight: false,
    error: null,
  };
}

export function markInFlight(state: ConsoleState): ConsoleState {
  return { ...state, inFlight: true, error: null };
}

/** A failed request leaves everything but the banner untouched. */
export function markError(state: ConsoleState, message: string): ConsoleState {
  return { ...state, inFlight: false, error: message };
}
