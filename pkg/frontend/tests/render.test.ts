// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import type { SessionResult, SessionState, SessionSummary } from "../src/api.js";
import { renderAnnotation, renderError, renderResult, renderSessionList } from "../src/render.js";
import { AnnotationFlow } from "../src/state.js";

function root(): HTMLElement {
  document.body.innerHTML = '<div id="app"></div>';
  return document.getElementById("app") as HTMLElement;
}

const STATE: SessionState = {
  session_id: "sess0001",
  status: "awaiting_annotation",
  annotator: "human",
  budget: 2,
  target: ["c0007"],
  selected: ["s10", "s11"],
  pending: [
    {
      id: "s10",
      tokens: ["when", "alpha", "beta", "spoke", "gamma", "listened"],
      mentions: [
        { key: "s10:1:3", span: [1, 3] },
        { key: "s10:4:5", span: [4, 5] },
      ],
    },
    {
      id: "s11",
      tokens: ["only", "delta", "remained"],
      mentions: [{ key: "s11:1:2", span: [1, 2] }],
    },
  ],
  collected: [],
};

/** Wire flow + renderer the way main.ts does, without the network. */
function mount(el: HTMLElement, flow: AnnotationFlow, onSubmit: () => void): void {
  const draw = (): void =>
    renderAnnotation(
      el,
      flow.view,
      (key, value) => {
        flow.decide(key, value);
        draw();
      },
      onSubmit,
    );
  draw();
}

function click(el: HTMLElement, selector: string): void {
  const target = el.querySelector<HTMLElement>(selector);
  if (!target) throw new Error(`nothing matches ${selector}`);
  target.click();
}

describe("renderAnnotation", () => {
  let el: HTMLElement;
  let flow: AnnotationFlow;

  beforeEach(() => {
    el = root();
    flow = new AnnotationFlow(structuredClone(STATE));
  });

  it("renders highlighted spans whose keys equal the API mention keys", () => {
    mount(el, flow, () => {});
    const keys = [...el.querySelectorAll(".mention")].map((m) => m.getAttribute("data-key"));
    expect(keys).toEqual(["s10:1:3", "s10:4:5"]);
    // Highlighting is by token index: the first span wraps tokens 1..2.
    const first = el.querySelector('.mention[data-key="s10:1:3"]');
    const indices = [...(first?.querySelectorAll(".token") ?? [])].map((t) =>
      Number(t.getAttribute("data-index")),
    );
    expect(indices).toEqual([1, 2]);
    expect(first?.textContent?.trim().replace(/\s+/g, " ")).toBe("alpha beta");
    // Every mention also gets a yes/no control row under the same key.
    const rows = [...el.querySelectorAll(".mention-row")].map((r) => r.getAttribute("data-key"));
    expect(rows).toEqual(["s10:1:3", "s10:4:5"]);
  });

  it("shows progress and target", () => {
    mount(el, flow, () => {});
    expect(el.querySelector(".progress")?.textContent).toBe("Progress: 0/2");
    expect(el.querySelector(".target")?.textContent).toContain("c0007");
  });

  it("disables submit until every span of the sentence is decided", () => {
    mount(el, flow, () => {});
    const submit = (): HTMLButtonElement => el.querySelector(".submit") as HTMLButtonElement;
    expect(submit().disabled).toBe(true);
    click(el, '.decide-yes[data-key="s10:1:3"]');
    expect(submit().disabled).toBe(true);
    click(el, '.decide-no[data-key="s10:4:5"]');
    expect(submit().disabled).toBe(false);
  });

  it("reflects clicks in the pressed state and the built record, with no inference", () => {
    mount(el, flow, () => {});
    click(el, '.decide-yes[data-key="s10:1:3"]');
    click(el, '.decide-yes[data-key="s10:4:5"]');
    click(el, '.decide-no[data-key="s10:4:5"]'); // change of mind
    expect(
      el.querySelector('.decide-yes[data-key="s10:1:3"]')?.getAttribute("aria-pressed"),
    ).toBe("true");
    expect(
      el.querySelector('.decide-no[data-key="s10:4:5"]')?.getAttribute("aria-pressed"),
    ).toBe("true");
    expect(
      el.querySelector('.decide-yes[data-key="s10:4:5"]')?.getAttribute("aria-pressed"),
    ).toBe("false");
    expect(flow.buildRecord()).toEqual({
      instance_id: "s10",
      decisions: { "s10:1:3": true, "s10:4:5": false },
    });
  });

  it("fires the submit callback only through the enabled button", () => {
    const onSubmit = vi.fn();
    mount(el, flow, onSubmit);
    click(el, '.decide-yes[data-key="s10:1:3"]');
    click(el, '.decide-yes[data-key="s10:4:5"]');
    click(el, ".submit");
    expect(onSubmit).toHaveBeenCalledTimes(1);
  });
});

describe("renderSessionList", () => {
  it("lists sessions and opens on click", () => {
    const el = root();
    const sessions: SessionSummary[] = [
      {
        session_id: "sess0000",
        status: "awaiting_annotation",
        annotator: "human",
        budget: 3,
        target: ["c0001"],
        pending_count: 3,
      },
      {
        session_id: "sess0001",
        status: "complete",
        annotator: "oracle",
        budget: 3,
        target: ["c0002"],
        pending_count: 0,
      },
    ];
    const opened: string[] = [];
    renderSessionList(el, sessions, (id) => opened.push(id));
    expect(el.querySelectorAll(".session").length).toBe(2);
    click(el, '.open-session[data-session="sess0000"]');
    expect(opened).toEqual(["sess0000"]);
    expect(el.querySelector('.session[data-session="sess0001"] .session-status')?.textContent).toBe(
      "complete",
    );
  });

  it("says so when the store is empty", () => {
    const el = root();
    renderSessionList(el, [], () => {});
    expect(el.querySelector(".empty")?.textContent).toContain("No sessions");
  });
});

describe("renderResult", () => {
  it("shows metrics, the trace, and the stored records", () => {
    const el = root();
    const result: SessionResult = {
      target: ["c0007"],
      selected: ["s10"],
      records: [
        { instance_id: "s10", decisions: { "s10:1:3": true, "s10:4:5": false }, annotator: "human" },
      ],
      augmented_ids: ["i0", "s10"],
      evaluation: { micro_f1: 0.875, precision: 0.9, recall: 0.85, tp: 9, fp: 1, fn: 2 },
      trace: {
        ce_outputs: { i0: ["c0003", "c0007"] },
        common: { concepts: ["c0003", "c0007"], counts: { c0003: 1, c0007: 1 } },
        ordered_queries: ["alpha | beta", "beta | alpha"],
        picks: [{ query_excluded: "c0003", instance: "s10", score: 1.5 }],
        fallback: false,
      },
    };
    renderResult(el, result);
    expect(el.querySelector(".micro-f1")?.textContent).toContain("0.8750");
    expect(el.querySelector(".common-concepts")?.textContent).toBe("c0003, c0007");
    expect([...el.querySelectorAll(".query")].map((q) => q.textContent)).toEqual([
      "alpha | beta",
      "beta | alpha",
    ]);
    expect(el.querySelector('.record[data-instance="s10"]')?.textContent).toContain(
      "s10:1:3=yes",
    );
  });
});

describe("renderError", () => {
  it("surfaces the message inline and retries via the callback", () => {
    const el = root();
    el.append(document.createElement("p"));
    const retry = vi.fn();
    renderError(el, "conflict: already annotated", retry);
    expect(el.querySelector(".error-banner")?.textContent).toContain("already annotated");
    click(el, ".retry-button");
    expect(retry).toHaveBeenCalledTimes(1);
  });
});
