"""The human-annotation service, driven end to end over HTTP.

Starts the service on a background thread with three synthetic items, plays
one rater's session against it (fetch, rate, repeat), posts a verification
edit, and reads the export. The browser console under frontend/ talks to
exactly these endpoints.
"""

import json
import tempfile
import threading
import urllib.request
from pathlib import Path

import numpy as np

from adiff.audio import save_wav
from adiff.dataforge import DifferenceRecord
from adiff.service import AnnotationService, AnnotationStore
from adiff.synth import TOY_MEL, synth_clip

workdir = Path(tempfile.mkdtemp(prefix="adiff-annot-"))
rng = np.random.default_rng(0)
records = []
for i, (a, b) in enumerate([("beep", "tone"), ("noise", "chirp"), ("hum", "click")]):
    for kind, stem in ((a, f"{i}a"), (b, f"{i}b")):
        save_wav(synth_clip(kind, 0.6, TOY_MEL.sample_rate, rng), workdir / f"{stem}.wav")
    records.append(
        DifferenceRecord(
            str(workdir / f"{i}a.wav"), str(workdir / f"{i}b.wav"), 1, "compare",
            f"the first audio is a {a} while the second is a {b}",
        )
    )

store = AnnotationStore(records, {}, ratings_path=workdir / "ratings.jsonl",
                        records_path=workdir / "records.jsonl")
server = AnnotationService(store).make_server(port=0)
port = server.server_address[1]
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{port}"
print("service on", base)


def get(path):
    with urllib.request.urlopen(base + path) as r:
        return json.loads(r.read()) if "audio" not in path else r.read()


def post(path, payload):
    req = urllib.request.Request(base + path, data=json.dumps(payload).encode(),
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as r:
        return json.loads(r.read())


# one rater works through the queue
while True:
    payload = get("/api/items/next?rater=demo-rater")
    if payload["done"]:
        print("queue exhausted")
        break
    item = payload["item"]
    audio = get(item["audio1_url"])
    print(f"item {item['item_id']}: {len(audio)} wav bytes, "
          f"notice shown: {payload['item']['notice'][:46]}...")
    post("/api/ratings", {"item_id": item["item_id"], "rater": "demo-rater",
                          "correctness": 4, "granularity": 3, "readability": 5})

# a verifier corrects item 2's explanation
out = post("/api/edits", {"item_id": 2, "approver": "verifier-1",
                          "removed_spans": [], "added_text": "Checked against both clips."})
print("edited explanation:", out["item"]["explanation"])

with urllib.request.urlopen(base + "/api/export") as r:
    print("export:\n" + r.read().decode())
server.shutdown()
