/**
 * Pure annotation-flow state: no DOM, no network.
 *
 * The flow pages through a session's pending sentences one at a time. The
 * operator decides yes/no for every mention of the current sentence; only
 * then can it be submitted. Decisions are kept verbatim — the submit payload
 * is exactly the recorded clicks, never inferred or defaulted.
 */

import type { PendingInstance, SessionState } from "./api.js";

/** What the annotation view renders for one session at one moment. */
export interface UiSessionView {
  sessionId: string;
  target: string[];
  annotated: number;
  total: number;
  current: PendingInstance | null;
  /** Current instance's per-mention decisions; undefined = not yet decided. */
  decisions: Map<string, boolean>;
  submitEnabled: boolean;
  done: boolean;
}

export class AnnotationFlow {
  private sessionId: string;
  private target: string[];
  private total: number;
  private queue: PendingInstance[];
  private decided = new Map<string, boolean>();

  constructor(state: SessionState) {
    this.sessionId = state.session_id;
    this.target = state.target;
    this.total = state.selected.length;
    this.queue = [...state.pending];
  }

  /** Replace local state with fresh server state (conflict recovery). */
  refresh(state: SessionState): void {
    this.sessionId = state.session_id;
    this.target = state.target;
    this.total = state.selected.length;
    this.queue = [...state.pending];
    this.decided.clear();
  }

  get current(): PendingInstance | null {
    return this.queue[0] ?? null;
  }

  /** Record one click. Unknown mention keys are rejected, not stored. */
  decide(mentionKey: string, value: boolean): void {
    const inst = this.current;
    if (!inst || !inst.mentions.some((m) => m.key === mentionKey)) {
      throw new Error(`mention ${mentionKey} is not part of the current sentence`);
    }
    this.decided.set(mentionKey, value);
  }

  /** Submit stays disabled until every mention of the current sentence is decided. */
  get submitEnabled(): boolean {
    const inst = this.current;
    if (!inst) return false;
    return inst.mentions.every((m) => this.decided.has(m.key));
  }

  /**
   * The record for the current sentence: exactly the clicks, keyed by the
   * API's mention keys. Throws if any mention is still undecided.
   */
  buildRecord(): { instance_id: string; decisions: Record<string, boolean> } {
    const inst = this.current;
    if (!inst) throw new Error("nothing left to annotate");
    const decisions: Record<string, boolean> = {};
    for (const m of inst.mentions) {
      const value = this.decided.get(m.key);
      if (value === undefined) {
        throw new Error(`mention ${m.key} has no decision yet`);
      }
      decisions[m.key] = value;
    }
    return { instance_id: inst.id, decisions };
  }

  /** After a successful submit: drop the head of the queue, clear clicks. */
  advance(): void {
    this.queue.shift();
    this.decided.clear();
  }

  get view(): UiSessionView {
    return {
      sessionId: this.sessionId,
      target: this.target,
      annotated: this.total - this.queue.length,
      total: this.total,
      current: this.current,
      decisions: new Map(this.decided),
      submitEnabled: this.submitEnabled,
      done: this.queue.length === 0,
    };
  }
}
