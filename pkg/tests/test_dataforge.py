import json

import numpy as np
import pytest

from adiff.dataforge import (
    CaptionRow,
    DifferenceRecord,
    VerificationEdit,
    apply_verification,
    corpus_entropy,
    density_score,
    flatten_captions,
    generate_explanations,
    hallucination_report,
    load_records,
    sample_pair,
    save_records,
)
from adiff.llm import LlmError, LlmRequest, LlmResponse, TemplateStubClient
from adiff.tagger import EventTimeline


def _rows(n_audios=2, captions=5):
    table = []
    for a in range(n_audios):
        row = {"file_name": f"audio{a}.wav"}
        for c in range(1, captions + 1):
            row[f"caption_{c}"] = f"caption {a}-{c}"
        table.append(row)
    return table


def test_flatten_multi_caption_rows_stay_adjacent():
    rows, rejected = flatten_captions(_rows())
    assert rejected == 0
    assert len(rows) == 10
    assert [r.audio for r in rows[:5]] == ["audio0.wav"] * 5
    assert rows[0].caption == "caption 0-1"


def test_flatten_single_caption_column():
    rows, _ = flatten_captions([{"file_name": "x.wav", "caption": "hello"}])
    assert len(rows) == 1


def test_flatten_missing_columns():
    with pytest.raises(ValueError, match="file_name"):
        flatten_captions([{"path": "x", "caption": "y"}])


def test_flatten_rejects_empty_cells_with_count():
    table = _rows()
    table[0]["caption_3"] = "  "
    rows, rejected = flatten_captions(table)
    assert rejected == 1
    assert len(rows) == 9


# -- exclusion-window pair sampling


def test_sample_pair_forced_cases():
    rng = np.random.default_rng(0)
    assert sample_pair(0, 6, rng) == 5
    assert sample_pair(4, 6, rng) == 3  # window wraps: {4,5,0,1,2} leaves only 3
    for i in range(6):
        j = sample_pair(i, 6, rng)
        assert j == (i + 5) % 6


def test_sample_pair_rejects_small_n():
    with pytest.raises(ValueError):
        sample_pair(0, 5, np.random.default_rng(0))


def test_sample_pair_never_hits_window_and_is_uniform():
    from scipy import stats

    rng = np.random.default_rng(123)
    n, i, draws = 100, 50, 100_000
    excluded = {(i + d) % n for d in range(5)}
    counts = np.zeros(n, int)
    for _ in range(draws):
        counts[sample_pair(i, n, rng)] += 1
    assert all(counts[j] == 0 for j in excluded)
    legal = np.array([counts[j] for j in range(n) if j not in excluded])
    chi2, p_value = stats.chisquare(legal)
    assert p_value > 0.001


# -- explanation generation


def test_stub_generation_mentions_both_captions():
    client = TemplateStubClient()
    r1 = CaptionRow("a.wav", "short repeating beep tones")
    r2 = CaptionRow("b.wav", "harsh broadband noise")
    record = generate_explanations(r1, r2, 1, client, prompt="compare briefly")
    assert record.provenance == "llm-generated"
    assert "short repeating beep tones" in record.explanation
    assert "harsh broadband noise" in record.explanation
    assert record.prompt == "compare briefly"


def test_stub_tier_lengths():
    client = TemplateStubClient()
    r1 = CaptionRow("a.wav", "one steady sine tone")
    r2 = CaptionRow("b.wav", "dry ticking clicks")
    t1 = generate_explanations(r1, r2, 1, client).explanation
    t3 = generate_explanations(r1, r2, 3, client).explanation
    assert t1.count(".") <= 2
    assert t3.count(".") >= 3
    assert len(t3.split()) > len(t1.split())


def test_generation_is_deterministic():
    r1 = CaptionRow("a.wav", "x sound")
    r2 = CaptionRow("b.wav", "y sound")
    a = generate_explanations(r1, r2, 2, TemplateStubClient())
    b = generate_explanations(r1, r2, 2, TemplateStubClient())
    assert a == b


def test_record_invariants():
    with pytest.raises(ValueError, match="distinct"):
        DifferenceRecord("a.wav", "a.wav", 1, "", "text")
    with pytest.raises(ValueError, match="tier"):
        DifferenceRecord("a.wav", "b.wav", 4, "", "text")
    with pytest.raises(ValueError, match="edit"):
        DifferenceRecord("a.wav", "b.wav", 1, "", "text", provenance="human-verified")


# -- verification


def _record(text="a loud bang then silence"):
    return DifferenceRecord("a.wav", "b.wav", 1, "compare", text)


def test_approval_without_change_flips_provenance():
    record = _record()
    out = apply_verification(record, VerificationEdit(approver="r1"))
    assert out.provenance == "human-verified"
    assert out.explanation == record.explanation
    assert len(out.edits) == 1
    assert out.edits[0].previous_text == record.explanation


def test_removal_edit_drops_span():
    out = apply_verification(_record(), VerificationEdit(approver="r1", removed_spans=("loud ",)))
    assert "loud" not in out.explanation
    assert out.explanation == "a bang then silence"


def test_added_text_is_appended():
    out = apply_verification(_record(), VerificationEdit(approver="r1", added_text="Ends abruptly."))
    assert out.explanation.endswith("Ends abruptly.")


def test_history_is_append_only_and_ordered():
    record = _record()
    one = apply_verification(record, VerificationEdit(approver="r1", removed_spans=("bang",)))
    two = apply_verification(one, VerificationEdit(approver="r2", added_text="more detail"))
    assert len(two.edits) == 2
    assert two.edits[0].approver == "r1"
    assert two.edits[1].approver == "r2"
    assert two.edits[0].previous_text == record.explanation


def test_empty_approver_rejected():
    with pytest.raises(ValueError, match="approver"):
        apply_verification(_record(), VerificationEdit(approver=""))


# -- analytics


def test_entropy_closed_forms():
    assert corpus_entropy("aaaa", "char") == pytest.approx(0.0, abs=1e-12)
    assert corpus_entropy("abab", "char") == pytest.approx(1.0, abs=1e-12)
    assert corpus_entropy("the cat the dog", "word") == pytest.approx(1.5, abs=1e-12)


def test_entropy_duplication_invariance():
    corpus = ["the cat sat", "a dog ran off"]
    assert corpus_entropy(corpus, "word") == pytest.approx(
        corpus_entropy(corpus + corpus, "word"), abs=1e-12
    )


def test_entropy_bounds():
    corpus = ["a b c a b a"]
    h = corpus_entropy(corpus, "word")
    assert 0.0 <= h <= np.log2(3)


def test_entropy_rejects_empty():
    with pytest.raises(ValueError):
        corpus_entropy([], "word")
    with pytest.raises(ValueError):
        corpus_entropy("abc", "letters")


def test_density_score_parses_json():
    class FixedClient:
        def complete(self, request):
            return LlmResponse('{"score": 4}')

    assert density_score(_record(), FixedClient()) == 4


def test_density_score_out_of_range_is_immediate_error():
    class SevenClient:
        calls = 0

        def complete(self, request):
            SevenClient.calls += 1
            return LlmResponse('{"score": 7}')

    with pytest.raises(LlmError, match=r"outside \[1, 5\]"):
        density_score(_record(), SevenClient())
    assert SevenClient.calls == 1


def test_density_score_retries_unparseable_then_fails():
    class NoiseClient:
        calls = 0

        def complete(self, request):
            NoiseClient.calls += 1
            return LlmResponse("no json here")

    with pytest.raises(LlmError, match="3 attempts"):
        density_score(_record(), NoiseClient())
    assert NoiseClient.calls == 3


def test_stub_density_is_monotone_in_tier():
    client = TemplateStubClient()
    r1 = CaptionRow("a.wav", "one steady sine tone")
    r2 = CaptionRow("b.wav", "harsh broadband noise")
    tier1 = generate_explanations(r1, r2, 1, client)
    tier3 = generate_explanations(r1, r2, 3, client)
    assert density_score(tier3, client) >= density_score(tier1, client)


# -- hallucination report


def _timeline(peaks, names=("beep", "noise", "hum", "click")):
    # peaks: {class: (prob, frame)}
    probs = np.full((6, len(names)), 0.05, dtype=np.float32)
    for cls, (p, f) in peaks.items():
        probs[f, names.index(cls)] = p
    return EventTimeline(probs, tuple(names))


def test_report_clean_when_all_top_classes_mentioned():
    tl1 = _timeline({"beep": (0.9, 1), "hum": (0.4, 2), "click": (0.3, 3)})
    tl2 = _timeline({"noise": (0.8, 0), "click": (0.5, 5), "hum": (0.2, 4)})
    record = _record("a beep with a hum and a click against noise with click and hum")
    report = hallucination_report(record, tl1, tl2)
    assert report.clean
    assert report.top_events_1[0] == ("beep", pytest.approx(0.9, abs=1e-6), 1)


def test_report_flags_single_miss():
    tl1 = _timeline({"beep": (0.9, 1), "hum": (0.4, 2), "click": (0.3, 3)})
    tl2 = _timeline({"noise": (0.8, 0), "click": (0.5, 5), "hum": (0.2, 4)})
    record = _record("a beep with a hum and a click against click and hum only")
    report = hallucination_report(record, tl1, tl2)
    assert report.possible_misses == [(2, "noise")]
    assert not report.possible_hallucinations


def test_report_flags_hallucinated_class():
    tl1 = _timeline({"beep": (0.9, 1), "hum": (0.4, 2), "click": (0.3, 3)})
    tl2 = _timeline({"beep": (0.7, 0), "hum": (0.6, 5), "click": (0.2, 4)})
    record = _record("a beep with hum and click plus heavy noise everywhere")
    report = hallucination_report(record, tl1, tl2)
    assert report.possible_hallucinations == ["noise"]
    assert "possible hallucination" in report.render()


# -- persistence


def test_record_roundtrip(tmp_path):
    client = TemplateStubClient()
    records = [
        generate_explanations(
            CaptionRow("a.wav", "x sound"), CaptionRow("b.wav", "y sound"), tier, client, prompt="p"
        )
        for tier in (1, 2, 3)
    ]
    records[2] = apply_verification(records[2], VerificationEdit(approver="me", added_text="ok"))
    path = tmp_path / "records.jsonl"
    save_records(records, path)
    loaded = load_records(path)
    assert loaded == records
    blob = path.read_text().splitlines()
    assert len(blob) == 3
    assert json.loads(blob[0])["tier"] == 1
