import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from adiff.audio import AudioClip, save_wav
from adiff.dataforge import DifferenceRecord, load_records, save_records
from adiff.service import (
    AnnotationService,
    AnnotationStore,
    LOUD_SOUND_NOTICE,
    RATING_RUBRIC,
    Rating,
    ValidationError,
)


def _records(tmp_path, n=3):
    paths = []
    rng = np.random.default_rng(0)
    for i in range(2 * n):
        clip = AudioClip(rng.uniform(-0.5, 0.5, 800).astype(np.float32), 8000)
        path = tmp_path / f"clip{i}.wav"
        save_wav(clip, path)
        paths.append(str(path))
    records = [
        DifferenceRecord(paths[2 * i], paths[2 * i + 1], 1, "compare", f"explanation {i}")
        for i in range(n)
    ]
    return records, paths


@pytest.fixture
def store(tmp_path):
    records, _ = _records(tmp_path)
    return AnnotationStore(
        records, {}, ratings_path=tmp_path / "ratings.jsonl", records_path=tmp_path / "records.jsonl"
    )


def test_next_item_is_lowest_pending(store):
    item = store.next_item("r1")
    assert item.item_id == 1


def test_next_item_is_idempotent_until_rating(store):
    assert store.next_item("r1").item_id == store.next_item("r1").item_id
    store.submit_rating(Rating(1, "r1", 3, 4, 5))
    assert store.next_item("r1").item_id == 2
    # a different rater still sees item 1
    assert store.next_item("r2").item_id == 1


def test_queue_exhaustion_returns_none(store):
    for i in (1, 2, 3):
        store.submit_rating(Rating(i, "r1", 3, 3, 3))
    assert store.next_item("r1") is None


def test_rating_validation_names_field():
    with pytest.raises(ValidationError) as err:
        Rating(1, "r1", 0, 4, 5)
    assert err.value.field == "correctness"
    with pytest.raises(ValidationError) as err:
        Rating(1, "r1", 3, 4, 7)
    assert err.value.field == "readability"
    with pytest.raises(ValidationError):
        Rating(1, "r1", 3, 4, True)


def test_export_means(store):
    store.submit_rating(Rating(1, "r1", 3, 4, 5))
    store.submit_rating(Rating(1, "r2", 2, 2, 2))
    store.submit_rating(Rating(2, "r1", 4, 4, 4))
    rows = store.export_rows()
    assert rows[0] == (1, 2, 2.5, 3.0, 3.5)
    assert rows[1] == (2, 1, 4.0, 4.0, 4.0)


def test_rerating_overwrites_last_write_wins(store):
    store.submit_rating(Rating(1, "r1", 2, 2, 2))
    store.submit_rating(Rating(1, "r1", 4, 4, 4))
    rows = store.export_rows()
    assert rows[0] == (1, 1, 4.0, 4.0, 4.0)


def test_rating_log_is_append_only(store):
    store.submit_rating(Rating(1, "r1", 2, 2, 2))
    store.submit_rating(Rating(1, "r1", 4, 4, 4))
    lines = store.ratings_path.read_text().strip().splitlines()
    assert len(lines) == 2  # both writes stay in the log; export folds them


def test_edit_updates_record_and_persists(store):
    item = store.submit_edit(1, "verifier", ["explanation "], "corrected text")
    assert "corrected text" in item.explanation
    assert item.status == "verified"
    on_disk = load_records(store.records_path)
    assert on_disk[0].provenance == "human-verified"
    assert on_disk[0].edits[0].approver == "verifier"


# -- HTTP layer


@pytest.fixture
def server(tmp_path):
    records, _ = _records(tmp_path)
    store = AnnotationStore(
        records, {}, ratings_path=tmp_path / "ratings.jsonl", records_path=tmp_path / "records.jsonl"
    )
    service = AnnotationService(store)
    httpd = service.make_server(port=0)
    port = httpd.server_address[1]
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{port}", store
    httpd.shutdown()


def _get(url):
    with urllib.request.urlopen(url) as resp:
        return resp.status, resp.read()


def _post(url, payload):
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode(), headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


def test_http_next_item_payload(server):
    base, _ = server
    status, body = _get(f"{base}/api/items/next?rater=r1")
    assert status == 200
    payload = json.loads(body)
    assert payload["done"] is False
    item = payload["item"]
    assert item["item_id"] == 1
    assert item["notice"] == LOUD_SOUND_NOTICE
    assert item["rubric"] == RATING_RUBRIC
    assert item["audio1_url"].startswith("/api/audio/")


def test_http_audio_bytes_are_bit_identical(server, tmp_path):
    base, store = server
    status, body = _get(f"{base}/api/items/next?rater=r1")
    item = json.loads(body)["item"]
    status, audio = _get(base + item["audio1_url"])
    assert status == 200
    aid = item["audio1_url"].rsplit("/", 1)[1]
    raw = open(store.audio_paths[aid], "rb").read()
    assert audio == raw


def test_http_rating_flow_and_export(server):
    base, _ = server
    status, body = _post(
        f"{base}/api/ratings",
        {"item_id": 1, "rater": "r1", "correctness": 3, "granularity": 4, "readability": 5},
    )
    assert status == 200 and body["ok"]
    status, body = _get(f"{base}/api/export")
    assert status == 200
    lines = body.decode().strip().splitlines()
    assert lines[0] == "item,n_raters,cor_mean,gra_mean,rdb_mean"
    assert lines[1] == "1,1,3.0000,4.0000,5.0000"


def test_http_rejects_out_of_range_with_field_name(server):
    base, _ = server
    status, body = _post(
        f"{base}/api/ratings",
        {"item_id": 1, "rater": "r1", "correctness": 0, "granularity": 4, "readability": 5},
    )
    assert status == 400
    assert body["field"] == "correctness"
    status, body = _post(
        f"{base}/api/ratings",
        {"item_id": 1, "rater": "r1", "correctness": 3, "granularity": 4, "readability": "5"},
    )
    assert status == 400
    assert body["field"] == "readability"


def test_http_edit_roundtrip(server):
    base, _ = server
    status, body = _post(
        f"{base}/api/edits",
        {"item_id": 2, "approver": "v1", "removed_spans": [], "added_text": "checked"},
    )
    assert status == 200
    assert body["item"]["explanation"].endswith("checked")
    status, raw = _get(f"{base}/api/items/2")
    assert "checked" in json.loads(raw)["item"]["explanation"]


def test_http_unknown_item_404(server):
    base, _ = server
    status, body = _post(
        f"{base}/api/ratings",
        {"item_id": 99, "rater": "r", "correctness": 3, "granularity": 3, "readability": 3},
    )
    assert status == 404
