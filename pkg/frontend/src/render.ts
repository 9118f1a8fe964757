/**
 * DOM rendering for the annotation panel. Framework-free: each view is a
 * function that replaces the root's children. Mention spans are highlighted
 * by token index and tagged with their API mention key, so tests (and the
 * submit path) can tie every control back to the exact key the server sent.
 */

import type { SessionResult, SessionSummary } from "./api.js";
import type { UiSessionView } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function clear(root: HTMLElement): void {
  root.replaceChildren();
}

export function renderError(root: HTMLElement, message: string, onRetry: () => void): void {
  const banner = el(
    "div",
    { class: "error-banner", role: "alert" },
    el("span", { class: "error-message" }, message),
    el("button", { class: "retry-button", type: "button" }, "Retry"),
  );
  banner.querySelector("button")?.addEventListener("click", onRetry);
  root.prepend(banner);
}

export function renderSessionList(
  root: HTMLElement,
  sessions: SessionSummary[],
  onOpen: (sessionId: string) => void,
): void {
  clear(root);
  root.append(el("h1", {}, "Annotation sessions"));
  if (sessions.length === 0) {
    root.append(el("p", { class: "empty" }, "No sessions in the store yet."));
    return;
  }
  const list = el("ul", { class: "session-list" });
  for (const s of sessions) {
    const open = el("button", { class: "open-session", "data-session": s.session_id, type: "button" });
    open.textContent = s.status === "awaiting_annotation" ? "Annotate" : "View result";
    open.addEventListener("click", () => onOpen(s.session_id));
    list.append(
      el(
        "li",
        { class: `session status-${s.status}`, "data-session": s.session_id },
        el("span", { class: "session-id" }, s.session_id),
        el("span", { class: "session-target" }, s.target.join(", ")),
        el("span", { class: "session-status" }, s.status),
        el("span", { class: "session-pending" }, `${s.pending_count} pending`),
        open,
      ),
    );
  }
  root.append(list);
}

/** Token strip with mention spans wrapped and tagged by mention key. */
function renderTokens(view: UiSessionView): HTMLElement {
  const inst = view.current;
  const strip = el("div", { class: "tokens" });
  if (!inst) return strip;

  const spanOf = new Map<number, string>();
  for (const m of inst.mentions) {
    for (let i = m.span[0]; i < m.span[1]; i++) spanOf.set(i, m.key);
  }
  let openKey: string | null = null;
  let wrap: HTMLElement | null = null;
  inst.tokens.forEach((token, i) => {
    const key = spanOf.get(i) ?? null;
    if (key !== openKey) {
      wrap = key === null ? null : el("span", { class: "mention", "data-key": key });
      if (wrap) strip.append(wrap);
      openKey = key;
    }
    const tok = el("span", { class: "token", "data-index": String(i) }, token);
    (wrap ?? strip).append(tok, " ");
  });
  return strip;
}

export function renderAnnotation(
  root: HTMLElement,
  view: UiSessionView,
  onDecide: (mentionKey: string, value: boolean) => void,
  onSubmit: () => void,
): void {
  clear(root);
  const inst = view.current;
  root.append(
    el("h1", {}, `Session ${view.sessionId}`),
    el("p", { class: "target" }, `Target type: ${view.target.join(", ")}`),
    el(
      "p",
      { class: "progress", "data-annotated": String(view.annotated), "data-total": String(view.total) },
      `Progress: ${view.annotated}/${view.total}`,
    ),
  );
  if (!inst) return;

  root.append(el("p", { class: "instance-id" }, inst.id), renderTokens(view));

  const panel = el("div", { class: "mention-panel" });
  for (const m of inst.mentions) {
    const text = inst.tokens.slice(m.span[0], m.span[1]).join(" ");
    const decided = view.decisions.get(m.key);
    const yes = el(
      "button",
      { class: "decide-yes", type: "button", "data-key": m.key, "aria-pressed": String(decided === true) },
      "Yes",
    );
    const no = el(
      "button",
      { class: "decide-no", type: "button", "data-key": m.key, "aria-pressed": String(decided === false) },
      "No",
    );
    yes.addEventListener("click", () => onDecide(m.key, true));
    no.addEventListener("click", () => onDecide(m.key, false));
    panel.append(
      el(
        "div",
        { class: "mention-row", "data-key": m.key },
        el("span", { class: "mention-text" }, text),
        el("span", { class: "mention-question" }, " is the target type? "),
        yes,
        no,
      ),
    );
  }
  root.append(panel);

  const submit = el("button", { class: "submit", type: "button" }, "Submit sentence");
  submit.disabled = !view.submitEnabled;
  submit.addEventListener("click", onSubmit);
  root.append(submit);
}

export function renderResult(root: HTMLElement, result: SessionResult): void {
  clear(root);
  root.append(
    el("h1", {}, "Session complete"),
    el(
      "p",
      { class: "micro-f1" },
      `micro-F1 ${result.evaluation.micro_f1.toFixed(4)} ` +
        `(precision ${result.evaluation.precision.toFixed(4)}, ` +
        `recall ${result.evaluation.recall.toFixed(4)})`,
    ),
    el("h2", {}, "Common concepts"),
    el("p", { class: "common-concepts" }, result.trace.common.concepts.join(", ") || "(fallback: none)"),
    el("h2", {}, "Queries"),
    el(
      "ul",
      { class: "queries" },
      ...result.trace.ordered_queries.map((q) => el("li", { class: "query" }, q)),
    ),
    el("h2", {}, "Annotated"),
    el(
      "ul",
      { class: "records" },
      ...result.records.map((r) =>
        el(
          "li",
          { class: "record", "data-instance": r.instance_id },
          `${r.instance_id}: ` +
            Object.entries(r.decisions)
              .map(([k, v]) => `${k}=${v ? "yes" : "no"}`)
              .join(", "),
        ),
      ),
    ),
  );
}
