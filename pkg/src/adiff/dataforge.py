"""Dataset construction, analytics, and the hallucination report.

The pipeline mirrors how the corpora are built: caption tables are
flattened to one (audio, caption) row each, partners are drawn with an
exclusion window around the anchor index, a chat client writes the tiered
explanation, and human verification edits are tracked append-only on the
record. Analytics cover unigram entropy and an LLM-judged density score;
the hallucination report cross-checks explanations against the frozen
tagger's event timelines.
"""

from __future__ import annotations

import csv
import json
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .llm import DENSITY_RUBRIC_PROMPT, EXPERT_SYSTEM_PROMPT, LlmError, LlmRequest
from .tagger import EventTimeline
from .tokenizer import metric_tokenize

__all__ = [
    "CaptionRow",
    "DifferenceRecord",
    "VerificationEdit",
    "flatten_captions",
    "load_caption_csv",
    "sample_pair",
    "generate_explanations",
    "apply_verification",
    "corpus_entropy",
    "density_score",
    "HallucinationReport",
    "hallucination_report",
    "save_records",
    "load_records",
]

EXCLUSION_WINDOW = 5  # indices i..i+4 are never paired with i

TIER_RULES = {
    1: (
        "Write a tier 1 explanation: concise and straightforward, at most two short "
        "sentences, mentioning only the key audio events and objects."
    ),
    2: (
        "Write a tier 2 explanation: one long analytical sentence covering audio events, "
        "sound sources, the sequence of sounds (temporal order), and any scene difference."
    ),
    3: (
        "Write a tier 3 explanation: a detailed multi-sentence paragraph on the sonic "
        "qualities of each audio, likely sources, signal characteristics, and the "
        "listener's experience, comparing complexity and engagement."
    ),
}


@dataclass(frozen=True)
class CaptionRow:
    audio: str
    caption: str
    split: str = "train"


@dataclass(frozen=True)
class VerificationEdit:
    approver: str
    removed_spans: tuple[str, ...] = ()
    added_text: str = ""
    previous_text: str = ""
    timestamp: float = 0.0


@dataclass(frozen=True)
class DifferenceRecord:
    """One dataset row: two audio references, tier, prompt, explanation."""

    audio1: str
    audio2: str
    tier: int
    prompt: str
    explanation: str
    provenance: str = "llm-generated"  # or "human-verified"
    edits: tuple[VerificationEdit, ...] = ()

    def __post_init__(self):
        if self.audio1 == self.audio2:
            raise ValueError("a difference record needs two distinct audio references")
        if self.tier not in (1, 2, 3):
            raise ValueError(f"tier must be 1, 2, or 3, got {self.tier}")
        if self.provenance == "human-verified" and not self.edits:
            raise ValueError("human-verified records must carry at least one edit entry")


# ---------------------------------------------------------------------------
# caption flattening and pair sampling


def flatten_captions(rows: list[dict], split: str = "train") -> tuple[list[CaptionRow], int]:
    """One CaptionRow per (audio, caption); multi-caption rows stay adjacent.

    Accepts a ``caption`` column or numbered ``caption_1..caption_N``
    columns. Rows with an empty caption cell are dropped; the second return
    value counts them.
    """
    if not rows:
        return [], 0
    caption_cols = [k for k in rows[0] if k == "caption" or k.startswith("caption_")]
    if "file_name" not in rows[0] or not caption_cols:
        raise ValueError("caption table needs a 'file_name' column and caption column(s)")
    caption_cols.sort(key=lambda c: (c != "caption", c))
    out: list[CaptionRow] = []
    rejected = 0
    for row in rows:
        for col in caption_cols:
            text = (row.get(col) or "").strip()
            if not text:
                rejected += 1
                continue
            out.append(CaptionRow(row["file_name"], text, split))
    return out, rejected


def load_caption_csv(path, split: str = "train") -> tuple[list[CaptionRow], int]:
    with open(path, newline="", encoding="utf-8") as f:
        return flatten_captions(list(csv.DictReader(f)), split)


def sample_pair(i: int, n: int, rng: np.random.Generator) -> int:
    """Draw a partner index j for anchor i, uniform over the legal set.

    The window {i, i+1, ..., i+4} is excluded, wrapping modulo n near the
    end of the list. Legal indices are exactly (i+5+t) mod n for
    t in [0, n-5), which makes the draw O(1) and exclusion-free by
    construction.
    """
    if n < EXCLUSION_WINDOW + 1:
        raise ValueError(f"need at least {EXCLUSION_WINDOW + 1} rows to sample a pair, got {n}")
    if not 0 <= i < n:
        raise ValueError(f"anchor index {i} out of range for {n} rows")
    return int((i + EXCLUSION_WINDOW + rng.integers(0, n - EXCLUSION_WINDOW)) % n)


# ---------------------------------------------------------------------------
# explanation generation and verification


def _generation_request(row1: CaptionRow, row2: CaptionRow, tier: int) -> LlmRequest:
    user = (
        f'Caption of the first audio: "{row1.caption}"\n'
        f'Caption of the second audio: "{row2.caption}"\n'
        f"Using knowledge about sound sources, materials, acoustics, and emotions, "
        f"describe the differences between the two audio recordings. {TIER_RULES[tier]}"
    )
    return LlmRequest(system=EXPERT_SYSTEM_PROMPT, user=user, expect="text")


def generate_explanations(
    row1: CaptionRow,
    row2: CaptionRow,
    tier: int,
    client,
    prompt: str = "",
) -> DifferenceRecord:
    """Ask the chat client for one tiered explanation of a caption pair."""
    if tier not in TIER_RULES:
        raise ValueError(f"tier must be 1, 2, or 3, got {tier}")
    request = _generation_request(row1, row2, tier)
    response = client.complete(request)
    return DifferenceRecord(
        audio1=row1.audio,
        audio2=row2.audio,
        tier=tier,
        prompt=prompt,
        explanation=response.text.strip(),
        provenance="llm-generated",
    )


def apply_verification(record: DifferenceRecord, edit: VerificationEdit) -> DifferenceRecord:
    """Apply a human edit: remove hallucinated spans, append corrections.

    The record becomes human-verified and the edit (with the pre-edit text)
    is appended to its history, so the original generation stays
    recoverable. An edit with no text change is an approval mark.
    """
    if not edit.approver:
        raise ValueError("verification edits need a non-empty approver id")
    text = record.explanation
    for span in edit.removed_spans:
        text = text.replace(span, "")
    if edit.added_text:
        text = (text.rstrip() + " " + edit.added_text.strip()).strip()
    text = " ".join(text.split())
    stamped = replace(
        edit,
        previous_text=record.explanation,
        timestamp=edit.timestamp or time.time(),
    )
    return replace(
        record,
        explanation=text,
        provenance="human-verified",
        edits=record.edits + (stamped,),
    )


# ---------------------------------------------------------------------------
# analytics


def corpus_entropy(corpus, level: str = "word") -> float:
    """Unigram Shannon entropy of a corpus in bits.

    ``level`` selects character or word symbols; words come from the same
    tokenizer the metrics use. Frequencies are normalized to probabilities
    and H = -sum p log2 p.
    """
    if isinstance(corpus, str):
        corpus = [corpus]
    counts: Counter = Counter()
    for text in corpus:
        if level == "char":
            counts.update(text)
        elif level == "word":
            counts.update(metric_tokenize(text))
        else:
            raise ValueError(f"level must be 'char' or 'word', got {level!r}")
    total = sum(counts.values())
    if total == 0:
        raise ValueError("cannot take the entropy of an empty corpus")
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


def density_score(record: DifferenceRecord, client, retries: int = 3) -> int:
    """LLM-judged information density of an explanation, integer 1..5.

    The judge must answer with a JSON body keyed "score"; unparseable
    answers are retried, an out-of-range score is an immediate error.
    """
    request = LlmRequest(
        system=DENSITY_RUBRIC_PROMPT,
        user=f'Difference explanation to rate:\n"""{record.explanation}"""',
        expect="json-score",
    )
    last = ""
    for _ in range(retries):
        response = client.complete(request)
        last = response.text
        try:
            start = last.index("{")
            end = last.rindex("}") + 1
            payload = json.loads(last[start:end])
            score = payload["score"]
        except (ValueError, KeyError, json.JSONDecodeError):
            continue
        if not isinstance(score, int) or isinstance(score, bool):
            raise LlmError(f"density score must be an integer, got {score!r}", request)
        if not 1 <= score <= 5:
            raise LlmError(f"density score {score} outside [1, 5]", request)
        return score
    raise LlmError(f"no parseable score after {retries} attempts; last answer: {last!r}", request)


# ---------------------------------------------------------------------------
# hallucination report


@dataclass
class HallucinationReport:
    """Advisory cross-check of an explanation against tagger timelines.

    Matching is token-level and exact, so the flags point at places worth a
    listen rather than delivering verdicts.
    """

    top_events_1: list[tuple[str, float, int]]
    top_events_2: list[tuple[str, float, int]]
    possible_misses: list[tuple[int, str]]  # (audio index 1|2, class name)
    possible_hallucinations: list[str]

    @property
    def clean(self) -> bool:
        return not self.possible_misses and not self.possible_hallucinations

    def render(self) -> str:
        lines = ["advisory hallucination report"]
        for idx, events in ((1, self.top_events_1), (2, self.top_events_2)):
            listed = ", ".join(f"{n} (peak {p:.2f} @ frame {f})" for n, p, f in events)
            lines.append(f"audio {idx} top events: {listed}")
        for idx, name in self.possible_misses:
            lines.append(f"possible miss: {name!r} is prominent in audio {idx} but unmentioned")
        for name in self.possible_hallucinations:
            lines.append(f"possible hallucination: {name!r} mentioned but not prominent in either audio")
        if self.clean:
            lines.append("no flags")
        return "\n".join(lines)


def _mentioned(class_name: str, explanation_tokens: set[str]) -> bool:
    name_tokens = metric_tokenize(class_name)
    return bool(name_tokens) and all(tok in explanation_tokens for tok in name_tokens)


def hallucination_report(
    record: DifferenceRecord,
    timeline1: EventTimeline,
    timeline2: EventTimeline,
    top_n: int = 3,
) -> HallucinationReport:
    """Compare the explanation with each audio's top event classes.

    A prominent class missing from the text is a "possible miss"; a class
    named in the text but prominent in neither audio is a "possible
    hallucination".
    """
    tokens = set(metric_tokenize(record.explanation))
    top1 = timeline1.top_events(top_n)
    top2 = timeline2.top_events(top_n)
    misses: list[tuple[int, str]] = []
    for idx, top in ((1, top1), (2, top2)):
        for name, _, _ in top:
            if not _mentioned(name, tokens):
                misses.append((idx, name))
    prominent = {name for name, _, _ in top1} | {name for name, _, _ in top2}
    all_classes = set(timeline1.class_names) | set(timeline2.class_names)
    hallucinated = sorted(
        name for name in all_classes - prominent if _mentioned(name, tokens)
    )
    return HallucinationReport(top1, top2, misses, hallucinated)


# ---------------------------------------------------------------------------
# persistence: line-delimited JSON


def save_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            row = asdict(r)
            row["edits"] = [asdict(e) for e in r.edits]
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_records(path) -> list[DifferenceRecord]:
    out: list[DifferenceRecord] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            edits = tuple(
                VerificationEdit(
                    approver=e["approver"],
                    removed_spans=tuple(e.get("removed_spans", ())),
                    added_text=e.get("added_text", ""),
                    previous_text=e.get("previous_text", ""),
                    timestamp=e.get("timestamp", 0.0),
                )
                for e in row.get("edits", [])
            )
            out.append(
                DifferenceRecord(
                    audio1=row["audio1"],
                    audio2=row["audio2"],
                    tier=int(row["tier"]),
                    prompt=row.get("prompt", ""),
                    explanation=row["explanation"],
                    provenance=row.get("provenance", "llm-generated"),
                    edits=edits,
                )
            )
    return out
