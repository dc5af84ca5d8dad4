"""Three-stage training: unimodal pretraining, multimodal grounding, finetune.

Stage 1 pretrains the decoder as a plain language model on explanation text
(the tagger is pretrained separately on tag data). Stage 2 grounds the
frozen decoder in audio by training only the mapping networks and the
cross-projection. Stage 3 unfreezes the language-model side at a gentler
rate. The audio encoder never trains in any stage, which is what keeps its
event timelines usable for hallucination auditing afterwards.

Freezing is enforced bitwise: parameters outside a stage's trainable set
are byte-compared before and after the stage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .dataforge import DifferenceRecord
from .decoding import DecodeConfig, greedy_decode
from .metrics import MetricReport, evaluate_pairs, pairs_from_texts
from .model import DiffExplainer, ModelConfig
from .optim import AdamState, LrSchedule, adam_step, lr_at
from .prompts import PromptDB, default_prompt_db
from .tagger import AudioEncoder, EncoderConfig, train_tagger
from .tokenizer import Vocab, train_bpe

__all__ = [
    "StagePlan",
    "StreamItem",
    "TrainingStream",
    "TrainResult",
    "TrainingDiverged",
    "build_stage_plan",
    "difference_stream",
    "text_stream",
    "mix_position_captioning",
    "train_stage",
    "write_run_manifest",
    "save_loss_curve",
    "ABLATION_VARIANTS",
    "AblationBudget",
    "AblationResult",
    "run_ablation",
    "evaluate_difference_model",
]

STAGE_TRAINABLE = {
    1: frozenset({"psi", "theta"}),
    2: frozenset({"zeta", "beta"}),
    3: frozenset({"zeta", "beta", "psi", "theta"}),
}


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class StagePlan:
    stage: int
    trainable: frozenset[str]
    epochs: int
    schedule: LrSchedule
    batch_size: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.stage not in (1, 2, 3):
            raise ValueError(f"stage must be 1, 2, or 3, got {self.stage}")
        if "phi" in self.trainable:
            raise ValueError("the audio encoder (phi) is never trainable")
        if self.stage == 2 and self.trainable != STAGE_TRAINABLE[2]:
            raise ValueError("stage 2 trains exactly {zeta, beta}")
        if self.stage == 3 and self.trainable != STAGE_TRAINABLE[3]:
            raise ValueError("stage 3 trains exactly {zeta, beta, psi, theta}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be >= 1")


_STAGE_DEFAULTS = {
    # (epochs, base lr, schedule kind, floor)
    1: (5, 3e-3, "warmup_cosine", 1e-4),
    2: (30, 3e-3, "warmup_step_decay", 0.0),
    3: (10, 1e-3, "warmup_cosine", 1e-6),
}


def build_stage_plan(
    stage: int,
    steps_per_epoch: int = 8,
    epochs: int | None = None,
    base_lr: float | None = None,
    batch_size: int = 2,
    seed: int = 0,
    warmup_frac: float = 0.1,
) -> StagePlan:
    """Stage defaults with overridable budget knobs.

    Stage 2 pairs warmup with step decay; stages 1 and 3 use warmup plus
    cosine decay, stage 3 down to a near-zero floor over few epochs.
    """
    if stage not in _STAGE_DEFAULTS:
        raise ValueError(f"stage must be 1, 2, or 3, got {stage}")
    d_epochs, d_lr, kind, floor = _STAGE_DEFAULTS[stage]
    epochs = d_epochs if epochs is None else epochs
    base_lr = d_lr if base_lr is None else base_lr
    total = max(1, epochs * steps_per_epoch)
    schedule = LrSchedule(
        kind=kind,
        base=base_lr,
        warmup_steps=max(1, int(total * warmup_frac)),
        total_steps=total,
        floor=floor,
    )
    return StagePlan(stage, STAGE_TRAINABLE[stage], epochs, schedule, batch_size, seed)


# ---------------------------------------------------------------------------
# training streams


@dataclass(frozen=True)
class StreamItem:
    kind: str  # "difference" | "caption" | "text"
    target: str
    audio1: str | None = None
    audio2: str | None = None
    prompt: str = ""

    def __post_init__(self):
        if self.kind not in ("difference", "caption", "text"):
            raise ValueError(f"unknown stream item kind {self.kind!r}")
        if self.kind != "text" and (self.audio1 is None or self.audio2 is None):
            raise ValueError(f"{self.kind} items need two audio references")
        if not self.target:
            raise ValueError("stream items need a non-empty target")


@dataclass
class TrainingStream:
    items: list[StreamItem]
    ratio: float = 0.0

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def difference_stream(records: list[DifferenceRecord]) -> TrainingStream:
    items = [
        StreamItem("difference", r.explanation, r.audio1, r.audio2, r.prompt) for r in records
    ]
    return TrainingStream(items, 0.0)


def text_stream(texts: list[str]) -> TrainingStream:
    return TrainingStream([StreamItem("text", t) for t in texts], 0.0)


def mix_position_captioning(
    records: list[DifferenceRecord],
    captions: list,
    ratio: float,
    rng: np.random.Generator,
    prompt_db: PromptDB | None = None,
    n_items: int | None = None,
) -> TrainingStream:
    """Interleave position-captioning items into the difference stream.

    Each emitted item is a caption item with probability ``ratio``. A
    caption item puts the captioned audio in the named slot ("first" or
    "second", uniform), pairs it with a random distractor in the other
    slot, and targets that audio's own caption.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    if ratio > 0.0 and not captions:
        raise ValueError("caption data is empty but the mixing ratio is positive")
    prompt_db = prompt_db or default_prompt_db()
    n_items = len(records) if n_items is None else n_items
    items: list[StreamItem] = []
    for _ in range(n_items):
        if ratio > 0.0 and rng.random() < ratio:
            row = captions[int(rng.integers(0, len(captions)))]
            distractor = row
            while distractor.audio == row.audio:
                distractor = captions[int(rng.integers(0, len(captions)))]
            position = "first" if rng.random() < 0.5 else "second"
            a1, a2 = (row.audio, distractor.audio) if position == "first" else (distractor.audio, row.audio)
            items.append(
                StreamItem("caption", row.caption, a1, a2, prompt_db.sample(position, rng))
            )
        else:
            r = records[int(rng.integers(0, len(records)))]
            items.append(StreamItem("difference", r.explanation, r.audio1, r.audio2, r.prompt))
    return TrainingStream(items, ratio)


# ---------------------------------------------------------------------------
# the stage trainer


@dataclass
class TrainResult:
    curve: list[tuple[int, float, float]]  # (step, loss, lr)
    state: dict[str, np.ndarray]

    @property
    def final_loss(self) -> float:
        return self.curve[-1][1]

    @property
    def initial_loss(self) -> float:
        return self.curve[0][1]


def _encode_target(vocab: Vocab, text: str) -> list[int]:
    return vocab.encode(text) + [vocab.end_of_text]


def train_stage(
    model: DiffExplainer,
    plan: StagePlan,
    stream: TrainingStream,
    vocab: Vocab,
    embeddings: dict[str, np.ndarray] | None = None,
    adam: AdamState | None = None,
) -> TrainResult:
    """Run one training stage; only the plan's groups may change.

    ``embeddings`` maps audio references to pooled encoder outputs (the
    encoder is frozen, so they are precomputed once). Determinism contract:
    (seed, stream, plan) fully determines the resulting parameters.
    """
    if plan.stage == 3 and 2 not in model.trained_stages:
        raise RuntimeError("stage 3 needs a completed stage-2 checkpoint first")
    if not len(stream):
        raise ValueError("empty training stream")
    needs_audio = any(item.kind != "text" for item in stream)
    if needs_audio and not embeddings:
        raise ValueError("audio-conditioned items need precomputed embeddings")

    trainable = model.params_in(plan.trainable)
    frozen_names = [n for n in model.params if n not in trainable]
    frozen_before = {n: model.params[n].data.tobytes() for n in frozen_names}

    rng = np.random.default_rng(plan.seed)
    adam = adam or AdamState()
    curve: list[tuple[int, float, float]] = []
    step = 0
    all_params = list(model.params.values())
    for _ in range(plan.epochs):
        order = rng.permutation(len(stream))
        for lo in range(0, len(order), plan.batch_size):
            batch_items = [stream.items[i] for i in order[lo : lo + plan.batch_size]]
            T.zero_grads(all_params)
            loss = _batch_loss(model, batch_items, vocab, embeddings, rng)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"stage {plan.stage} loss became {value} at step {step}; "
                    f"lower the learning rate or check the data"
                )
            T.backward(loss, trainable.values())
            lr = lr_at(plan.schedule, step)
            adam_step(trainable, adam, lr)
            curve.append((step, value, lr))
            step += 1

    for name in frozen_names:
        if model.params[name].data.tobytes() != frozen_before[name]:
            raise AssertionError(f"frozen parameter {name!r} changed during stage {plan.stage}")
    model.trained_stages.add(plan.stage)
    return TrainResult(curve, model.state_dict())


def _batch_loss(model, items, vocab, embeddings, rng):
    text_targets = [_encode_target(vocab, it.target) for it in items if it.kind == "text"]
    cond = [it for it in items if it.kind != "text"]
    losses = []
    if text_targets:
        # random placement: pretraining must cover the positions the
        # assembled prefix will later push generated text into
        span = model.config.prefix_len + 1
        offsets = [
            int(rng.integers(0, max(1, min(span, model.config.max_context - len(t)))))
            for t in text_targets
        ]
        losses.append(model.lm_loss(text_targets, offsets) * (len(text_targets) / len(items)))
    if cond:
        batch = []
        for it in cond:
            assembly = model.forward_prefix(
                embeddings[it.audio1], embeddings[it.audio2], vocab.encode(it.prompt)
            )
            batch.append((assembly, _encode_target(vocab, it.target)))
        losses.append(model.sequence_loss(batch) * (len(cond) / len(items)))
    total = losses[0]
    for extra in losses[1:]:
        total = total + extra
    return total


def write_run_manifest(path, plans: list[StagePlan], **extra) -> None:
    """Structured key = value record of what a run was configured to do."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("# training run manifest\n")
        for key, value in extra.items():
            f.write(f"{key} = {value}\n")
        for plan in plans:
            p = f"stage{plan.stage}"
            f.write(f"{p}.trainable = {','.join(sorted(plan.trainable))}\n")
            f.write(f"{p}.epochs = {plan.epochs}\n")
            f.write(f"{p}.batch_size = {plan.batch_size}\n")
            f.write(f"{p}.seed = {plan.seed}\n")
            f.write(f"{p}.lr.kind = {plan.schedule.kind}\n")
            f.write(f"{p}.lr.base = {plan.schedule.base}\n")
            f.write(f"{p}.lr.warmup_steps = {plan.schedule.warmup_steps}\n")
            f.write(f"{p}.lr.total_steps = {plan.schedule.total_steps}\n")
            f.write(f"{p}.lr.floor = {plan.schedule.floor}\n")


def save_loss_curve(curve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss", "lr"])
        for step, loss, lr in curve:
            writer.writerow([step, f"{loss:.6f}", f"{lr:.8f}"])


# ---------------------------------------------------------------------------
# evaluation and the ablation grid


def evaluate_difference_model(
    model: DiffExplainer,
    records: list[DifferenceRecord],
    vocab: Vocab,
    embeddings: dict[str, np.ndarray],
    decode_config: DecodeConfig | None = None,
) -> MetricReport:
    """Greedy-decode each record's pair and score against its explanation."""
    decode_config = decode_config or DecodeConfig(mode="greedy", max_new_tokens=80)
    candidates = []
    references = []
    for r in records:
        assembly = model.forward_prefix(
            embeddings[r.audio1], embeddings[r.audio2], vocab.encode(r.prompt)
        )
        tokens = greedy_decode(model, assembly, decode_config)
        candidates.append(vocab.decode(tokens))
        references.append([r.explanation])
    return evaluate_pairs(pairs_from_texts(candidates, references))


ABLATION_VARIANTS = (
    "language-only",
    "no-cross-projection",
    "with-cross-projection",
    "scale:base",
    "scale:med",
    "scale:large",
    "scale:xl",
    "with-stage3",
    "without-stage3",
    "with-position-captioning",
    "without-position-captioning",
)


@dataclass(frozen=True)
class AblationBudget:
    """Shared compute budget so variants stay comparable (equal step counts)."""

    stage1_epochs: int = 30
    stage2_epochs: int = 24
    stage3_epochs: int = 6
    batch_size: int = 2
    stage1_lr: float = 3e-3
    stage2_lr: float = 5e-3
    stage3_lr: float = 2e-3
    tagger_epochs: int = 8
    tagger_clips_per_class: int = 10
    position_ratio: float = 0.25
    max_new_tokens: int = 60
    audio_prefix_len: int = 8
    dim: int = 64


@dataclass
class AblationResult:
    variant: str
    per_seed: list[MetricReport]
    mean_bleu1: float
    mean_average: float

    @classmethod
    def from_reports(cls, variant: str, reports: list[MetricReport]) -> "AblationResult":
        return cls(
            variant,
            reports,
            float(np.mean([r.bleu1 for r in reports])),
            float(np.mean([r.average for r in reports])),
        )


def _variant_settings(variant: str, budget: AblationBudget):
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"unknown ablation variant {variant!r}; pick from {ABLATION_VARIANTS}")
    random_encoder = variant == "language-only"
    use_cross = variant not in ("language-only", "no-cross-projection")
    stage3 = variant in ("with-stage3",)
    ratio = budget.position_ratio if variant == "with-position-captioning" else 0.0
    depth = None
    if variant.startswith("scale:"):
        from .model import SCALE_DEPTHS

        depth = SCALE_DEPTHS[variant.split(":", 1)[1]]
    return random_encoder, use_cross, stage3, ratio, depth


def toy_model_config(vocab_size: int, encoder_dim: int, **overrides) -> ModelConfig:
    base = dict(
        dim=48,
        audio_prefix_len=4,
        text_prefix_len=8,
        proj_depth=1,
        cross_depth=1,
        decoder_depth=2,
        heads=2,
        vocab_size=vocab_size,
        encoder_dim=encoder_dim,
        mapper_const_len=2,
        cross_const_len=2,
        mlp_mult=2,
        max_context=160,
    )
    base.update(overrides)
    return ModelConfig(**base)


def run_ablation(
    variant: str,
    world,
    seeds: list[int],
    budget: AblationBudget | None = None,
    prompt_db: PromptDB | None = None,
) -> AblationResult:
    """Train and evaluate one variant on a synthetic world, once per seed.

    Every variant gets the same stage budgets and the same evaluation
    protocol (greedy decode on held-out pairs, full metric report).
    """
    from .synth import make_tagged_clips, toy_difference_records

    budget = budget or AblationBudget()
    prompt_db = prompt_db or default_prompt_db()
    random_encoder, use_cross, stage3, ratio, depth = _variant_settings(variant, budget)

    reports: list[MetricReport] = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        train_records = toy_difference_records(world, 1, prompt_db, np.random.default_rng(seed + 1000), "train")
        eval_records = toy_difference_records(world, 1, prompt_db, np.random.default_rng(seed + 2000), "eval")
        corpus = sorted({r.explanation for r in train_records} | {r.prompt for r in train_records})
        vocab = train_bpe(corpus, 256 + 2 + 64)

        enc_cfg = EncoderConfig(mels=world.mel_cfg.mels, hidden=32, classes=world.classes)
        encoder = AudioEncoder(enc_cfg, rng=np.random.default_rng(seed))
        if not random_encoder:
            mels, tags, _ = make_tagged_clips(
                budget.tagger_clips_per_class * len(world.classes),
                world.classes,
                np.random.default_rng(seed + 3000),
                world.mel_cfg,
            )
            train_tagger(encoder, mels, tags, epochs=budget.tagger_epochs, rng=np.random.default_rng(seed + 4000))

        overrides = {
            "use_cross_projection": use_cross,
            "audio_prefix_len": budget.audio_prefix_len,
            "dim": budget.dim,
        }
        if depth is not None:
            overrides["decoder_depth"] = depth
        config = toy_model_config(vocab.size, enc_cfg.hidden, **overrides)
        model = DiffExplainer(config, encoder, seed=seed)

        embeddings = {cid: encoder.embed(world.mel(cid)) for cid in world.clips}

        texts = [r.explanation for r in train_records]
        steps1 = max(1, (len(texts) + budget.batch_size - 1) // budget.batch_size)
        plan1 = build_stage_plan(1, steps_per_epoch=steps1, epochs=budget.stage1_epochs,
                                 base_lr=budget.stage1_lr, batch_size=budget.batch_size, seed=seed)
        train_stage(model, plan1, text_stream(texts), vocab)

        if ratio > 0.0:
            from .dataforge import CaptionRow

            captions = [CaptionRow(cid, world.caption(cid)) for cid, _ in
                        sorted(world.kinds.items()) if cid.startswith("train")]
            stream = mix_position_captioning(
                train_records, captions, ratio, np.random.default_rng(seed + 5000),
                prompt_db, n_items=len(train_records),
            )
        else:
            stream = difference_stream(train_records)
        steps2 = max(1, (len(stream) + budget.batch_size - 1) // budget.batch_size)
        plan2 = build_stage_plan(2, steps_per_epoch=steps2, epochs=budget.stage2_epochs,
                                 base_lr=budget.stage2_lr, batch_size=budget.batch_size, seed=seed)
        train_stage(model, plan2, stream, vocab, embeddings)

        if stage3:
            plan3 = build_stage_plan(3, steps_per_epoch=steps2, epochs=budget.stage3_epochs,
                                     base_lr=budget.stage3_lr, batch_size=budget.batch_size, seed=seed)
            train_stage(model, plan3, stream, vocab, embeddings)

        decode_cfg = DecodeConfig(mode="greedy", max_new_tokens=budget.max_new_tokens)
        reports.append(evaluate_difference_model(model, eval_records, vocab, embeddings, decode_cfg))
    return AblationResult.from_reports(variant, reports)
