/** Thin fetch wrapper with single-request serialization.
 *
 * The console runs one session per tab and never has more than one
 * request in flight: `locked` callers get null back and the click is
 * dropped, which is what makes double-clicks harmless.
 */

import { AnswerLabel } from "./types.js";

export class SessionApi {
  private base: string;
  private busy = false;

  constructor(base = "") {
    this.base = base;
  }

  get inFlight(): boolean {
    return this.busy;
  }

  private async request(
    path: string,
    init?: RequestInit,
  ): Promise<unknown | null> {
    if (this.busy) {
      return null;
    }
    this.busy = true;
    try {
      const resp = await fetch(this.base + path, {
        headers: { "content-type": "application/json" },
        ...init,
      });
      if (!resp.ok) {
        throw new Error(`${resp.status} ${await resp.text()}`);
      }
      return await resp.json();
    } finally {
      this.busy = false;
    }
  }

  create(seed?: number, target?: number): Promise<unknown | null> {
    const body: Record<string, number> = {};
    if (seed !== undefined) body.seed = seed;
    if (target !== undefined) body.target = target;
    return this.request("/session", {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  answer(sessionId: string, label: AnswerLabel): Promise<unknown | null> {
    return this.request(`/session/${sessionId}/answer`, {
      method: "POST",
      body: JSON.stringify({ answer: label }),
    });
  }
}
