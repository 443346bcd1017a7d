/** Server payload shapes, verbatim from the guessgame HTTP API.
 *
 * The console never computes model quantities of its own; everything it
 * shows is read from these payloads, so the types double as the wire
 * contract the fixture tests pin down.
 */

export interface ObjectJson {
  category: string;
  color: string;
  size: string;
  /** [x0, y0, x1, y1] in unit-square coordinates, y increasing downward. */
  bbox: [number, number, number, number];
}

export interface SceneJson {
  seed: number;
  k: number;
  objects: ObjectJson[];
}

export interface QuestionJson {
  tokens: string[];
  text: string;
}

/** Per-turn attention bookkeeping from the questioner. */
export interface TraceJson {
  turn: number;
  alpha_q: number[] | null;
  P: number[] | null;
  M: number[] | null;
  att_q: number[] | null;
  att_h: number[] | null;
  att: number[];
  lambda: number | null;
  selected: number;
}

export type SessionStatus = "awaiting_answer" | "finished";

export interface SessionView {
  session_id: string;
  status: SessionStatus;
  turn: number;
  target: number;
  scene: SceneJson;
  question: QuestionJson | null;
  trace?: TraceJson;
  guess_distribution?: number[];
  predicted?: number;
  success?: boolean;
}

export type AnswerLabel = "yes" | "no" | "na";

/** Raised when a payload does not look like a SessionView. */
export class PayloadError extends Error {}
