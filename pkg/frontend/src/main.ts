/**
 * Application entry: the interactive session loop.
 *
 * Lists sessions, opens one, pages through its pending sentences, submits
 * each sentence's decisions, and shows the final metrics and selection trace
 * once the server finalizes. API errors appear inline with a retry control;
 * a conflict response (someone else submitted first) refetches the server
 * state and rebuilds the queue from it.
 */

import { ApiClient, ApiError } from "./api.js";
import { AnnotationFlow } from "./state.js";
import { renderAnnotation, renderError, renderResult, renderSessionList } from "./render.js";

export interface AppHandle {
  /** Resolves when the current navigation settles (used by tests). */
  idle: Promise<void>;
}

export function sessionFlow(baseUrl: string, root: HTMLElement): AppHandle {
  const api = new ApiClient(baseUrl);
  let idle: Promise<void> = Promise.resolve();

  const guard = (work: () => Promise<void>): void => {
    idle = work().catch((err) => {
      const message = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      renderError(root, message, () => guard(showList));
    });
  };

  async function showList(): Promise<void> {
    const sessions = await api.listSessions();
    renderSessionList(root, sessions, (sessionId) => guard(() => openSession(sessionId)));
  }

  async function openSession(sessionId: string): Promise<void> {
    const state = await api.getSession(sessionId);
    if (state.status !== "awaiting_annotation") {
      return showResult(sessionId);
    }
    const flow = new AnnotationFlow(state);
    drawAnnotation(flow, sessionId);
    return Promise.resolve();
  }

  function drawAnnotation(flow: AnnotationFlow, sessionId: string): void {
    renderAnnotation(
      root,
      flow.view,
      (key, value) => {
        flow.decide(key, value);
        drawAnnotation(flow, sessionId);
      },
      () => guard(() => submitCurrent(flow, sessionId)),
    );
  }

  async function submitCurrent(flow: AnnotationFlow, sessionId: string): Promise<void> {
    const record = flow.buildRecord();
    let state;
    try {
      state = await api.submitAnnotations(sessionId, [record]);
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        // Someone else got there first: adopt the server's view of the queue.
        const fresh = await api.getSession(sessionId);
        if (fresh.status !== "awaiting_annotation") {
          return showResult(sessionId);
        }
        flow.refresh(fresh);
        drawAnnotation(flow, sessionId);
        return;
      }
      throw err;
    }
    if (state.status === "complete") {
      return showResult(sessionId);
    }
    flow.advance();
    drawAnnotation(flow, sessionId);
  }

  async function showResult(sessionId: string): Promise<void> {
    const result = await api.getResult(sessionId);
    renderResult(root, result);
  }

  guard(showList);
  return {
    get idle() {
      return idle;
    },
  };
}

declare global {
  interface Window {
    SUPERCD_API_BASE?: string;
  }
}

// Boot automatically in a browser; tests import sessionFlow directly.
if (typeof document !== "undefined" && document.getElementById("app")) {
  const base = window.SUPERCD_API_BASE ?? "http://127.0.0.1:8765";
  sessionFlow(base, document.getElementById("app") as HTMLElement);
}
