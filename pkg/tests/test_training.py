import numpy as np
import pytest

from adiff.dataforge import CaptionRow
from adiff.optim import LrSchedule
from adiff.prompts import default_prompt_db
from adiff.tokenizer import train_bpe
from adiff.training import (
    STAGE_TRAINABLE,
    StagePlan,
    StreamItem,
    TrainingDiverged,
    build_stage_plan,
    difference_stream,
    mix_position_captioning,
    text_stream,
    train_stage,
    write_run_manifest,
    save_loss_curve,
)

from conftest import tiny_model


def _vocab():
    return train_bpe(["five words of tiny corpus", "more words for the merges"], 280)


def _model(seed=0):
    return tiny_model(seed=seed, vocab_size=280)


def _toy_stream(n=4):
    items = [
        StreamItem("difference", f"clip {i} differs", f"a{i}", f"b{i}", "compare")
        for i in range(n)
    ]
    from adiff.training import TrainingStream

    return TrainingStream(items)


def _toy_embeddings(model, n=4):
    rng = np.random.default_rng(0)
    out = {}
    for i in range(n):
        out[f"a{i}"] = rng.standard_normal(model.config.encoder_dim).astype(np.float32)
        out[f"b{i}"] = rng.standard_normal(model.config.encoder_dim).astype(np.float32)
    return out


# -- stage plans


def test_stage_plan_trainable_sets():
    assert build_stage_plan(2).trainable == frozenset({"zeta", "beta"})
    plan3 = build_stage_plan(3)
    assert plan3.trainable == frozenset({"zeta", "beta", "psi", "theta"})
    assert "phi" not in plan3.trainable
    assert plan3.epochs == 10
    assert build_stage_plan(2).epochs == 30


def test_stage_plan_schedule_kinds():
    assert build_stage_plan(2).schedule.kind == "warmup_step_decay"
    assert build_stage_plan(3).schedule.kind == "warmup_cosine"
    assert build_stage_plan(3).schedule.floor == pytest.approx(1e-6)


def test_stage_plan_validation():
    with pytest.raises(ValueError):
        build_stage_plan(4)
    sched = LrSchedule("warmup_cosine", 1e-3, 1, 10)
    with pytest.raises(ValueError, match="phi"):
        StagePlan(2, frozenset({"phi", "zeta"}), 1, sched)
    with pytest.raises(ValueError, match="stage 2"):
        StagePlan(2, frozenset({"zeta"}), 1, sched)
    with pytest.raises(ValueError, match="stage 3"):
        StagePlan(3, frozenset({"zeta", "beta"}), 1, sched)


# -- stream mixing


def test_mix_ratio_zero_is_pure_difference():
    from adiff.dataforge import DifferenceRecord

    records = [DifferenceRecord(f"a{i}.wav", f"b{i}.wav", 1, "p", f"text {i}") for i in range(5)]
    stream = mix_position_captioning(records, [], 0.0, np.random.default_rng(0), n_items=50)
    assert all(item.kind == "difference" for item in stream)


def test_mix_ratio_one_is_pure_caption():
    from adiff.dataforge import DifferenceRecord

    records = [DifferenceRecord("a.wav", "b.wav", 1, "p", "t")]
    captions = [CaptionRow(f"c{i}.wav", f"caption {i}") for i in range(4)]
    stream = mix_position_captioning(records, captions, 1.0, np.random.default_rng(0), n_items=40)
    assert all(item.kind == "caption" for item in stream)


def test_mix_requires_captions_when_ratio_positive():
    from adiff.dataforge import DifferenceRecord

    records = [DifferenceRecord("a.wav", "b.wav", 1, "p", "t")]
    with pytest.raises(ValueError, match="caption data"):
        mix_position_captioning(records, [], 0.5, np.random.default_rng(0))


def test_mix_fraction_within_3_sigma():
    from adiff.dataforge import DifferenceRecord

    records = [DifferenceRecord("a.wav", "b.wav", 1, "p", "t")]
    captions = [CaptionRow(f"c{i}.wav", f"caption {i}") for i in range(6)]
    n = 10_000
    stream = mix_position_captioning(
        records, captions, 0.25, np.random.default_rng(5), n_items=n
    )
    count = sum(1 for item in stream if item.kind == "caption")
    sigma = np.sqrt(n * 0.25 * 0.75)
    assert abs(count - n * 0.25) <= 3 * sigma


def test_caption_items_target_their_own_caption():
    from adiff.dataforge import DifferenceRecord

    records = [DifferenceRecord("a.wav", "b.wav", 1, "p", "t")]
    captions = [CaptionRow(f"c{i}.wav", f"caption {i}") for i in range(5)]
    by_audio = {c.audio: c.caption for c in captions}
    db = default_prompt_db()
    first_prompts = set(db.list_for("first"))
    stream = mix_position_captioning(records, captions, 1.0, np.random.default_rng(1), db, 200)
    for item in stream:
        assert item.audio1 != item.audio2
        if item.prompt in first_prompts:
            assert by_audio[item.audio1] == item.target
        else:
            assert by_audio[item.audio2] == item.target


# -- the trainer


def test_freezing_is_bitwise_in_stage2():
    model = _model()
    vocab = _vocab()
    stream = _toy_stream()
    emb = _toy_embeddings(model)
    before = {n: p.data.tobytes() for n, p in model.params.items()}
    plan = build_stage_plan(2, steps_per_epoch=2, epochs=2, seed=0)
    train_stage(model, plan, stream, vocab, emb)
    for name, p in model.params.items():
        group = name.split(".", 1)[0]
        if group in ("phi", "psi", "theta"):
            assert p.data.tobytes() == before[name], name
        # zeta/beta must actually move
    moved = [n for n, p in model.params.items() if p.data.tobytes() != before[n]]
    assert any(n.startswith("zeta") for n in moved)
    assert any(n.startswith("beta") for n in moved)


def test_stage3_requires_stage2():
    model = _model()
    plan = build_stage_plan(3, steps_per_epoch=2, epochs=1)
    with pytest.raises(RuntimeError, match="stage-2"):
        train_stage(model, plan, _toy_stream(), _vocab(), _toy_embeddings(model))


def test_training_is_seed_deterministic():
    def run():
        model = tiny_model()
        vocab = _vocab()
        plan = build_stage_plan(2, steps_per_epoch=2, epochs=3, seed=7)
        result = train_stage(model, plan, _toy_stream(), vocab, _toy_embeddings(model))
        return result

    a = run()
    b = run()
    assert [x[1] for x in a.curve] == [x[1] for x in b.curve]
    assert all(a.state[k].tobytes() == b.state[k].tobytes() for k in a.state)


def test_loss_decreases_on_tiny_run():
    model = _model()
    vocab = _vocab()
    plan = build_stage_plan(2, steps_per_epoch=2, epochs=10, base_lr=5e-3, seed=0)
    result = train_stage(model, plan, _toy_stream(), vocab, _toy_embeddings(model))
    assert result.final_loss < result.initial_loss


def test_divergence_aborts_with_diagnostic():
    model = _model()
    model.params["theta.head.w"].data[:] = np.nan
    plan = build_stage_plan(2, steps_per_epoch=2, epochs=1)
    with pytest.raises(TrainingDiverged, match="nan"):
        train_stage(model, plan, _toy_stream(), _vocab(), _toy_embeddings(model))


def test_stage1_trains_text_only():
    model = _model()
    vocab = _vocab()
    before = {n: p.data.tobytes() for n, p in model.params.items()}
    plan = build_stage_plan(1, steps_per_epoch=2, epochs=2, seed=0)
    result = train_stage(model, plan, text_stream(["one text", "two texts", "three"]), vocab)
    for name, p in model.params.items():
        group = name.split(".", 1)[0]
        if group in ("phi", "zeta", "beta"):
            assert p.data.tobytes() == before[name]
    assert 1 in model.trained_stages
    assert result.curve


def test_manifest_and_curve_files(tmp_path):
    plan = build_stage_plan(2, steps_per_epoch=4, epochs=2, seed=3)
    write_run_manifest(tmp_path / "manifest.txt", [plan], seed=3, ratio=0.25)
    text = (tmp_path / "manifest.txt").read_text()
    assert "stage2.trainable = beta,zeta" in text
    assert "ratio = 0.25" in text
    save_loss_curve([(0, 1.5, 1e-3), (1, 1.2, 9e-4)], tmp_path / "curve.csv")
    lines = (tmp_path / "curve.csv").read_text().strip().splitlines()
    assert lines[0] == "step,loss,lr"
    assert lines[1].startswith("0,1.5")
