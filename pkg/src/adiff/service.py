"""HTTP service for the human rating and verification protocol.

Endpoints (JSON bodies unless noted):

    GET  /api/items/next?rater=ID   lowest-id pending item this rater has
                                    not rated yet, with rubric and notice
    GET  /api/items/{id}            one item by id
    POST /api/ratings               {item_id, rater, correctness, granularity, readability}
    POST /api/edits                 {item_id, approver, removed_spans, added_text}
    GET  /api/audio/{audio_id}      stored WAV bytes, bit for bit
    GET  /api/export                CSV of per-item rating means

Ratings append to a line-delimited JSON log (the export is a pure fold over
it); re-rating by the same rater is last-write-wins. A console build can be
served from a static directory at /.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .dataforge import DifferenceRecord, VerificationEdit, apply_verification, save_records

__all__ = ["AnnotationItem", "Rating", "AnnotationStore", "AnnotationService", "RATING_RUBRIC", "LOUD_SOUND_NOTICE"]

LOUD_SOUND_NOTICE = (
    "Please note that certain sections of this audio test may include unexpectedly loud "
    "sounds. To ensure a comfortable experience, we suggest setting your volume to a "
    "suitable level before starting and adjusting it as necessary throughout the test."
)

TASK_INSTRUCTIONS = (
    "Your task is to rate the difference explanation between the two audios. First, "
    "listen to each audio clip and analyze the difference between the two audios. Pay "
    "attention to differences in terms of audio events (dog barking vs cat meowing), "
    "sound sources (musical instrument, human voice), acoustic scene (park vs living "
    "room), signal characteristics (frequency, pitch, loudness, etc) emotion response "
    "(listening to the audio invokes a sense of happiness, fear, in you) and any other "
    "difference using world-knowledge or using deductive reasoning. Once you have "
    "analyzed the clip, asses the below audio difference explanations provided."
)

RATING_RUBRIC = {
    "correctness": {
        "question": "How accurate is the audio difference explanation?",
        "scale": {
            "1": "The explanation is mostly incorrect, with significant inaccuracies in identifying audio events, acoustic scenes, or signal characteristics.",
            "2": "The explanation has several inaccuracies but captures some correct audio events and acoustic scenes.",
            "3": "The explanation is partially correct, with a mix of accurate and inaccurate details.",
            "4": "The explanation is mostly correct, with minor inaccuracies.",
            "5": "The explanation is entirely correct, accurately identifying all relevant audio events, acoustic scenes, and signal characteristics.",
        },
    },
    "granularity": {
        "question": "How detailed and granular is the audio difference explanation?",
        "scale": {
            "1": "The explanation is very vague, lacking detail and specificity.",
            "2": "The explanation provides some detail but is generally too broad.",
            "3": "The explanation is moderately detailed, covering key aspects but missing finer points.",
            "4": "The explanation is detailed, covering most aspects with good specificity.",
            "5": "The explanation is highly detailed, thoroughly covering all relevant aspects with precise specificity.",
        },
    },
    "readability": {
        "question": "How easy to read and understand is the audio difference explanation?",
        "scale": {
            "1": "The explanation is very difficult to read, with poor structure and clarity.",
            "2": "The explanation is somewhat difficult to read, with several issues in structure and clarity.",
            "3": "The explanation is moderately readable, with some issues in structure and clarity.",
            "4": "The explanation is mostly readable, with minor issues in structure and clarity.",
            "5": "The explanation is very easy to read, with excellent structure and clarity.",
        },
    },
}

DIMENSIONS = ("correctness", "granularity", "readability")


class ValidationError(ValueError):
    def __init__(self, message: str, fieldname: str):
        super().__init__(message)
        self.field = fieldname


@dataclass
class AnnotationItem:
    item_id: int
    audio1: str  # audio registry ids
    audio2: str
    explanation: str
    tier: int
    status: str = "pending"  # pending -> rated | verified

    def payload(self) -> dict:
        return {
            "item_id": self.item_id,
            "audio1_url": f"/api/audio/{self.audio1}",
            "audio2_url": f"/api/audio/{self.audio2}",
            "explanation": self.explanation,
            "tier": self.tier,
            "status": self.status,
            "notice": LOUD_SOUND_NOTICE,
            "instructions": TASK_INSTRUCTIONS,
            "rubric": RATING_RUBRIC,
        }


@dataclass(frozen=True)
class Rating:
    item_id: int
    rater: str
    correctness: int
    granularity: int
    readability: int
    timestamp: float = 0.0

    def __post_init__(self):
        for dim in DIMENSIONS:
            value = getattr(self, dim)
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
                raise ValidationError(f"{dim} must be an integer in [1, 5], got {value!r}", dim)


class AnnotationStore:
    """Items plus an append-only rating log; single writer, snapshot readers."""

    def __init__(self, records: list[DifferenceRecord], audio_paths: dict[str, str],
                 ratings_path=None, records_path=None):
        self._lock = threading.Lock()
        self.audio_paths = dict(audio_paths)
        self.records = list(records)
        self.records_path = records_path
        self.items: list[AnnotationItem] = []
        for idx, record in enumerate(self.records):
            self.items.append(
                AnnotationItem(
                    item_id=idx + 1,
                    audio1=self._audio_id(record.audio1),
                    audio2=self._audio_id(record.audio2),
                    explanation=record.explanation,
                    tier=record.tier,
                )
            )
        self.ratings: dict[tuple[int, str], Rating] = {}
        self.ratings_path = Path(ratings_path) if ratings_path else None
        if self.ratings_path and self.ratings_path.exists():
            for line in self.ratings_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    row = json.loads(line)
                    r = Rating(**row)
                    self.ratings[(r.item_id, r.rater)] = r

    def _audio_id(self, path: str) -> str:
        for aid, known in self.audio_paths.items():
            if known == path:
                return aid
        aid = f"a{len(self.audio_paths)}"
        self.audio_paths[aid] = path
        return aid

    def item(self, item_id: int) -> AnnotationItem:
        for it in self.items:
            if it.item_id == item_id:
                return it
        raise KeyError(f"no item {item_id}")

    def next_item(self, rater: str) -> AnnotationItem | None:
        """Lowest-id item without a rating from this rater; None when done."""
        with self._lock:
            for it in self.items:
                if (it.item_id, rater) not in self.ratings:
                    return it
        return None

    def submit_rating(self, rating: Rating) -> None:
        self.item(rating.item_id)  # existence check
        with self._lock:
            self.ratings[(rating.item_id, rating.rater)] = rating
            it = self.item(rating.item_id)
            if it.status == "pending":
                it.status = "rated"
            if self.ratings_path:
                with open(self.ratings_path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(asdict(rating)) + "\n")

    def submit_edit(self, item_id: int, approver: str, removed_spans, added_text: str) -> AnnotationItem:
        with self._lock:
            it = self.item(item_id)
            record = self.records[item_id - 1]
            edited = apply_verification(
                record,
                VerificationEdit(
                    approver=approver,
                    removed_spans=tuple(removed_spans or ()),
                    added_text=added_text or "",
                ),
            )
            self.records[item_id - 1] = edited
            it.explanation = edited.explanation
            if it.status == "pending":
                it.status = "verified"
            if self.records_path:
                save_records(self.records, self.records_path)
            return it

    def export_rows(self) -> list[tuple]:
        """Per-item rating means over the current log (pure fold)."""
        rows = []
        with self._lock:
            ratings = list(self.ratings.values())
        for it in self.items:
            mine = [r for r in ratings if r.item_id == it.item_id]
            if not mine:
                continue
            n = len(mine)
            rows.append(
                (
                    it.item_id,
                    n,
                    sum(r.correctness for r in mine) / n,
                    sum(r.granularity for r in mine) / n,
                    sum(r.readability for r in mine) / n,
                )
            )
        return rows

    def export_csv(self) -> str:
        lines = ["item,n_raters,cor_mean,gra_mean,rdb_mean"]
        for item_id, n, cor, gra, rdb in self.export_rows():
            lines.append(f"{item_id},{n},{cor:.4f},{gra:.4f},{rdb:.4f}")
        return "\n".join(lines) + "\n"


def _require_int(body: dict, key: str) -> int:
    value = body.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValidationError(f"{key} must be an integer in [1, 5], got {value!r}", key)
    return value


class AnnotationService:
    def __init__(self, store: AnnotationStore, static_dir=None):
        self.store = store
        self.static_dir = Path(static_dir) if static_dir else None

    def make_server(self, host: str = "127.0.0.1", port: int = 8765) -> ThreadingHTTPServer:
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # tests stay quiet
                pass

            def _send(self, code: int, body: bytes, content_type: str):
                self.send_response(code)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(body)

            def _json(self, code: int, payload: dict):
                self._send(code, json.dumps(payload).encode("utf-8"), "application/json")

            def do_OPTIONS(self):
                self.send_response(204)
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")
                self.end_headers()

            def do_GET(self):
                try:
                    service._get(self)
                except Exception as e:  # pragma: no cover - defensive
                    self._json(500, {"error": str(e)})

            def do_POST(self):
                try:
                    service._post(self)
                except ValidationError as e:
                    self._json(400, {"error": str(e), "field": e.field})
                except KeyError as e:
                    self._json(404, {"error": str(e)})
                except Exception as e:  # pragma: no cover - defensive
                    self._json(500, {"error": str(e)})

        return ThreadingHTTPServer((host, port), Handler)

    # -- request handling

    def _get(self, handler) -> None:
        url = urlparse(handler.path)
        parts = [p for p in url.path.split("/") if p]
        if url.path == "/api/export":
            handler._send(200, self.store.export_csv().encode("utf-8"), "text/csv")
        elif url.path == "/api/items/next":
            rater = parse_qs(url.query).get("rater", [""])[0]
            if not rater:
                handler._json(400, {"error": "rater id is required", "field": "rater"})
                return
            item = self.store.next_item(rater)
            if item is None:
                handler._json(200, {"done": True, "item": None})
            else:
                handler._json(200, {"done": False, "item": item.payload()})
        elif len(parts) == 3 and parts[:2] == ["api", "items"]:
            try:
                item = self.store.item(int(parts[2]))
            except (KeyError, ValueError):
                handler._json(404, {"error": f"no item {parts[2]}"})
                return
            handler._json(200, {"item": item.payload()})
        elif len(parts) == 3 and parts[:2] == ["api", "audio"]:
            path = self.store.audio_paths.get(parts[2])
            if path is None or not Path(path).exists():
                handler._json(404, {"error": f"no audio {parts[2]}"})
                return
            handler._send(200, Path(path).read_bytes(), "audio/wav")
        elif self.static_dir is not None:
            rel = url.path.lstrip("/") or "index.html"
            target = (self.static_dir / rel).resolve()
            if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
                handler._json(404, {"error": "not found"})
                return
            ctype = {
                ".html": "text/html",
                ".js": "text/javascript",
                ".css": "text/css",
            }.get(target.suffix, "application/octet-stream")
            handler._send(200, target.read_bytes(), ctype)
        else:
            handler._json(404, {"error": "not found"})

    def _post(self, handler) -> None:
        length = int(handler.headers.get("Content-Length", 0))
        try:
            body = json.loads(handler.rfile.read(length).decode("utf-8")) if length else {}
        except json.JSONDecodeError:
            handler._json(400, {"error": "request body must be JSON", "field": "body"})
            return
        if handler.path == "/api/ratings":
            rater = body.get("rater", "")
            if not rater:
                raise ValidationError("rater id is required", "rater")
            rating = Rating(
                item_id=int(body.get("item_id", 0)),
                rater=str(rater),
                correctness=_require_int(body, "correctness"),
                granularity=_require_int(body, "granularity"),
                readability=_require_int(body, "readability"),
                timestamp=time.time(),
            )
            self.store.submit_rating(rating)
            handler._json(200, {"ok": True, "item_id": rating.item_id})
        elif handler.path == "/api/edits":
            approver = body.get("approver", "")
            if not approver:
                raise ValidationError("approver id is required", "approver")
            item = self.store.submit_edit(
                int(body.get("item_id", 0)),
                str(approver),
                body.get("removed_spans", []),
                str(body.get("added_text", "")),
            )
            handler._json(200, {"ok": True, "item": item.payload()})
        else:
            handler._json(404, {"error": "not found"})

    def serve_forever(self, host: str = "127.0.0.1", port: int = 8765) -> None:
        server = self.make_server(host, port)
        print(f"annotation service on http://{host}:{port}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
