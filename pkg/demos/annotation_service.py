#!/usr/bin/env python3
"""
Annotation service walkthrough: drive the HTTP API the way a UI would.

Starts the service in-process on a local port, creates a human-annotator
session, then plays the annotator's role over plain HTTP:

  POST /sessions                     start a session (selection runs now)
  GET  /sessions                     list sessions and their states
  GET  /sessions/{id}                read the pending queue
  POST /sessions/{id}/annotations    submit mention decisions, batch by batch
  GET  /sessions/{id}/result         final records, metrics, and trace

Decisions here are scripted from the generator's ground truth; a person (or
the bundled web UI) would click them instead. Artifacts land in
demos/out/service/.
"""

import json
import threading
import time
import urllib.request
import warnings
from pathlib import Path

import uvicorn

from supercd.fsner import default_task_specs
from supercd.interface.service import create_app
from supercd.ontology import save_ontology
from supercd.sir import build_dataset, build_vocab, init_model, save_retriever, train
from supercd.synth import gen_corpus, gen_ontology, save_corpus

SEED = 1
PORT = 8901
BASE = f"http://127.0.0.1:{PORT}"
OUT_DIR = Path(__file__).resolve().parent / "out" / "service"


def call(method: str, path: str, body: dict | None = None) -> dict:
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(f"{BASE}{path}", data=data, method=method)
    req.add_header("content-type", "application/json")
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


# ---------------------------------------------------------------------------
# Artifacts on disk, exactly as the CLI would produce them
# ---------------------------------------------------------------------------
OUT_DIR.mkdir(parents=True, exist_ok=True)
ontology = gen_ontology(
    n_concepts=40, depth=4, branching_range=(2, 4), extra_parent_prob=0.15, seed=SEED
)
corpus, view = gen_corpus(
    ontology, n_sentences=1500, zipf_s=1.1, signature_tokens_per_concept=2,
    noise_sigma=0.05, d_f=16, seed=SEED,
)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    dataset = build_dataset(
        ontology, corpus, n_pairs=1000, n_neg_excluded=10, n_neg_random=10,
        max_included=1, seed=SEED,
    )
retriever = train(
    init_model(build_vocab(corpus, ontology), d=32, seed=SEED),
    dataset, corpus, ontology, lr=0.1, epochs=3, seed=SEED,
).model
save_ontology(view, OUT_DIR / "ontology.json")
save_corpus(corpus, OUT_DIR / "corpus.json")
save_retriever(retriever, OUT_DIR / "retriever.json")

# ---------------------------------------------------------------------------
# Serve in a background thread
# ---------------------------------------------------------------------------
server = uvicorn.Server(
    uvicorn.Config(
        create_app(OUT_DIR / "sessions"), host="127.0.0.1", port=PORT, log_level="warning"
    )
)
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
print(f"service listening on {BASE}")

# ---------------------------------------------------------------------------
# Create a human-annotator session
# ---------------------------------------------------------------------------
spec = default_task_specs(view, n_types=1, k=5, skew=1.0, seed=SEED)[0]
state = call(
    "POST",
    "/sessions",
    {
        "ontology": str(OUT_DIR / "ontology.json"),
        "corpus": str(OUT_DIR / "corpus.json"),
        "retriever": str(OUT_DIR / "retriever.json"),
        "task": {
            "target": sorted(spec.target_concepts),
            "illustrative_source": spec.illustrative_source,
            "k": 5,
            "pool_fraction": 0.5,
            "seed": SEED,
        },
        "budget": 3,
        "annotator": "human",
        "seed": SEED,
    },
)
sid = state["session_id"]
targets = set(state["target"])
print(f"session {sid}: status {state['status']}, {len(state['pending'])} sentences queued")
print("all sessions:", [(s["session_id"], s["status"]) for s in call("GET", "/sessions")])

# ---------------------------------------------------------------------------
# Annotate one sentence at a time, watching the queue shrink
# ---------------------------------------------------------------------------
closures = {
    inst.id: {m.key(inst.id): bool(ontology.closure(m.direct_concepts) & targets)
              for m in inst.mentions}
    for inst in corpus
}
for entry in list(state["pending"]):
    shown = " ".join(entry["tokens"][:8])
    decisions = {m["key"]: closures[entry["id"]][m["key"]] for m in entry["mentions"]}
    reply = call(
        "POST",
        f"/sessions/{sid}/annotations",
        {"records": [{"instance_id": entry["id"], "decisions": decisions}]},
    )
    print(
        f"  annotated {entry['id']} ({shown} ...) -> "
        f"{sum(decisions.values())}/{len(decisions)} positive, status {reply['status']}"
    )

# ---------------------------------------------------------------------------
# The last submission finalizes: training and evaluation already ran
# ---------------------------------------------------------------------------
result = call("GET", f"/sessions/{sid}/result")
print(f"\nfinal micro-F1 {result['evaluation']['micro_f1']:.4f} "
      f"(precision {result['evaluation']['precision']:.4f}, "
      f"recall {result['evaluation']['recall']:.4f})")
print(f"records stored: {[(r['instance_id'], r['annotator']) for r in result['records']]}")
print(f"session files under {OUT_DIR / 'sessions'}")

server.should_exit = True
thread.join(timeout=5)
