"""Synthetic audio generators and toy benchmark worlds.

Everything at desk scale trains and evaluates on generated clips: sixteen
parametric sound classes with per-clip nuisance variation (gain, noise
floor, frequency jitter), caption templates per class, and helpers that
assemble tagged clips and difference-pair corpora.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip, MelConfig, MelSpec, mel_spectrogram

__all__ = [
    "TOY_CLASSES",
    "TOY_MEL",
    "synth_clip",
    "caption_for",
    "make_tagged_clips",
    "ToyWorld",
    "build_toy_world",
]

TOY_CLASSES = (
    "beep",
    "tone",
    "noise",
    "chirp",
    "hum",
    "click",
    "whistle",
    "rumble",
    "hiss",
    "siren",
    "ping",
    "buzz",
    "knock",
    "sweep",
    "static",
    "drone",
)

# Small feature config keeps toy mels cheap: 16 kHz, 32 bands, ~100 frames/s.
TOY_MEL = MelConfig(sample_rate=16000, win=512, hop=160, mels=32)

_CAPTIONS = {
    "beep": "short repeating beep tones",
    "tone": "one steady sine tone",
    "noise": "harsh broadband noise",
    "chirp": "a rising frequency chirp",
    "hum": "a deep mains hum",
    "click": "dry ticking clicks",
    "whistle": "a thin wavering whistle",
    "rumble": "heavy low rumble",
    "hiss": "airy high hiss",
    "siren": "a wailing siren cycle",
    "ping": "a ringing metallic ping",
    "buzz": "a rough electric buzz",
    "knock": "dull knocking thumps",
    "sweep": "a falling frequency sweep",
    "static": "crackling static bursts",
    "drone": "a thick beating drone",
}


def caption_for(kind: str) -> str:
    try:
        return _CAPTIONS[kind]
    except KeyError:
        raise KeyError(f"unknown toy class {kind!r}") from None


def _t(seconds: float, sr: int) -> np.ndarray:
    return np.arange(int(round(seconds * sr))) / sr


def synth_clip(
    kind: str,
    seconds: float = 0.8,
    sr: int = 16000,
    rng: np.random.Generator | None = None,
) -> AudioClip:
    """Generate one clip of the given class with random nuisance parameters."""
    rng = rng or np.random.default_rng(0)
    t = _t(seconds, sr)
    n = t.size
    jitter = 1.0 + rng.uniform(-0.05, 0.05)
    phase = rng.uniform(0, 2 * np.pi)

    if kind == "beep":
        gate = (np.sin(2 * np.pi * 8.0 * t) > 0).astype(np.float64)
        x = np.sin(2 * np.pi * 1000.0 * jitter * t + phase) * gate
    elif kind == "tone":
        x = np.sin(2 * np.pi * 440.0 * jitter * t + phase)
    elif kind == "noise":
        x = rng.uniform(-1, 1, n)
    elif kind == "chirp":
        f = 200.0 + (3800.0 * t / t[-1])
        x = np.sin(2 * np.pi * np.cumsum(f) / sr + phase)
    elif kind == "hum":
        base = 60.0 * jitter
        x = sum(np.sin(2 * np.pi * base * k * t + phase) / k for k in (1, 2, 3))
    elif kind == "click":
        x = np.zeros(n)
        period = int(sr / 6)
        for start in range(0, n, period):
            end = min(n, start + 40)
            x[start:end] = np.exp(-np.arange(end - start) / 6.0) * np.sign(
                np.sin(7.0 * start + phase)
            )
    elif kind == "whistle":
        vib = 1.0 + 0.02 * np.sin(2 * np.pi * 5.0 * t)
        x = np.sin(2 * np.pi * 2500.0 * jitter * vib * t + phase)
    elif kind == "rumble":
        raw = rng.standard_normal(n)
        kernel = np.ones(64) / 64.0
        x = np.convolve(raw, kernel, mode="same")
        x /= max(1e-9, np.abs(x).max())
    elif kind == "hiss":
        raw = rng.standard_normal(n)
        x = np.diff(raw, prepend=raw[0])
        x /= max(1e-9, np.abs(x).max())
    elif kind == "siren":
        f = 900.0 + 300.0 * np.sin(2 * np.pi * 1.0 * t)
        x = np.sin(2 * np.pi * np.cumsum(f) / sr + phase)
    elif kind == "ping":
        x = np.sin(2 * np.pi * 1500.0 * jitter * t + phase) * np.exp(-t * 6.0)
    elif kind == "buzz":
        x = np.sign(np.sin(2 * np.pi * 150.0 * jitter * t + phase))
    elif kind == "knock":
        x = np.zeros(n)
        period = int(sr / 3)
        for start in range(0, n, period):
            end = min(n, start + int(0.05 * sr))
            seg = _t(0.05, sr)[: end - start]
            x[start:end] = np.sin(2 * np.pi * 80.0 * seg) * np.exp(-seg * 40.0)
    elif kind == "sweep":
        f = 4000.0 - (3800.0 * t / t[-1])
        x = np.sin(2 * np.pi * np.cumsum(f) / sr + phase)
    elif kind == "static":
        x = rng.uniform(-1, 1, n) * (rng.uniform(0, 1, n) > 0.85)
    elif kind == "drone":
        base = 110.0 * jitter
        x = np.sin(2 * np.pi * base * t + phase) + np.sin(2 * np.pi * (base + 3.0) * t)
        x /= 2.0
    else:
        raise KeyError(f"unknown toy class {kind!r}")

    gain = float(np.exp(rng.uniform(np.log(0.15), np.log(0.8))))
    floor = rng.standard_normal(n) * rng.uniform(0.002, 0.02)
    x = gain * x / max(1e-9, np.abs(x).max()) + floor
    return AudioClip(np.clip(x, -1, 1).astype(np.float32), sr)


def make_tagged_clips(
    n: int,
    classes: tuple[str, ...],
    rng: np.random.Generator,
    mel_cfg: MelConfig = TOY_MEL,
    seconds: float = 0.8,
) -> tuple[list[MelSpec], np.ndarray, list[str]]:
    """n single-class clips as mels, with multi-hot tags and class labels."""
    mels: list[MelSpec] = []
    labels: list[str] = []
    tags = np.zeros((n, len(classes)), dtype=np.float32)
    for i in range(n):
        kind = classes[int(rng.integers(0, len(classes)))]
        clip = synth_clip(kind, seconds=seconds, sr=mel_cfg.sample_rate, rng=rng)
        mels.append(mel_spectrogram(clip, mel_cfg))
        tags[i, classes.index(kind)] = 1.0
        labels.append(kind)
    return mels, tags, labels


@dataclass
class ToyWorld:
    """A self-contained synthetic benchmark: clips, captions, and pair lists.

    ``pairs`` entries are (clip_id_1, clip_id_2); each clip id maps to one
    generated AudioClip and its class. Train and eval pairs cover the same
    class combinations but disjoint clip instances.
    """

    classes: tuple[str, ...]
    mel_cfg: MelConfig
    clips: dict[str, AudioClip]
    kinds: dict[str, str]
    train_pairs: list[tuple[str, str]]
    eval_pairs: list[tuple[str, str]]
    mels: dict[str, MelSpec] = field(default_factory=dict)

    def caption(self, clip_id: str) -> str:
        return caption_for(self.kinds[clip_id])

    def mel(self, clip_id: str) -> MelSpec:
        if clip_id not in self.mels:
            self.mels[clip_id] = mel_spectrogram(self.clips[clip_id], self.mel_cfg)
        return self.mels[clip_id]


MEMORIZATION_PAIRS = (
    ("beep", "tone"),
    ("noise", "chirp"),
    ("hum", "beep"),
    ("tone", "noise"),
    ("chirp", "hum"),
    ("beep", "noise"),
    ("tone", "chirp"),
    ("noise", "hum"),
)


def memorization_world(seed: int = 0, mel_cfg: MelConfig = TOY_MEL) -> ToyWorld:
    """Eight-pair fitting benchmark: every pair is a distinct class combination.

    Five generated sound classes, one clip each; the eight ordered pairs
    cover eight different unordered combinations, so each pair has a unique
    explanation to memorize.
    """
    rng = np.random.default_rng(seed)
    classes = ("beep", "tone", "noise", "chirp", "hum")
    clips: dict[str, AudioClip] = {}
    kinds: dict[str, str] = {}
    for kind in classes:
        cid = f"train-{kind}-0"
        clips[cid] = synth_clip(kind, seconds=0.8, sr=mel_cfg.sample_rate, rng=rng)
        kinds[cid] = kind
    pairs = [(f"train-{a}-0", f"train-{b}-0") for a, b in MEMORIZATION_PAIRS]
    return ToyWorld(classes, mel_cfg, clips, kinds, pairs, [])


def toy_difference_records(world: "ToyWorld", tier: int, prompt_db, rng, split: str = "train"):
    """Difference records for a world's pairs, written by the offline stub.

    Targets depend only on the class pair, so held-out clips of the same
    classes share the reference text with their training twins; a model
    that grounds the class words in audio generalizes, one that does not
    can only guess them.
    """
    from .dataforge import CaptionRow, generate_explanations
    from .llm import TemplateStubClient

    client = TemplateStubClient()
    pairs = world.train_pairs if split == "train" else world.eval_pairs
    records = []
    for a, b in pairs:
        records.append(
            generate_explanations(
                CaptionRow(a, world.caption(a)),
                CaptionRow(b, world.caption(b)),
                tier,
                client,
                prompt=prompt_db.sample(tier, rng),
            )
        )
    return records


def build_toy_world(
    classes: tuple[str, ...] = ("beep", "tone", "noise", "chirp"),
    instances_per_class: int = 3,
    eval_instances_per_class: int = 1,
    seconds: float = 0.8,
    mel_cfg: MelConfig = TOY_MEL,
    seed: int = 0,
) -> ToyWorld:
    """Build disjoint train/eval pair sets over all ordered class pairs."""
    rng = np.random.default_rng(seed)
    clips: dict[str, AudioClip] = {}
    kinds: dict[str, str] = {}

    def gen(kind: str, split: str, idx: int) -> str:
        cid = f"{split}-{kind}-{idx}"
        clips[cid] = synth_clip(kind, seconds=seconds, sr=mel_cfg.sample_rate, rng=rng)
        kinds[cid] = kind
        return cid

    train_ids = {k: [gen(k, "train", i) for i in range(instances_per_class)] for k in classes}
    eval_ids = {k: [gen(k, "eval", i) for i in range(eval_instances_per_class)] for k in classes}

    train_pairs: list[tuple[str, str]] = []
    eval_pairs: list[tuple[str, str]] = []
    for a in classes:
        for b in classes:
            if a == b:
                continue
            for i in range(instances_per_class):
                train_pairs.append((train_ids[a][i], train_ids[b][(i + 1) % instances_per_class]))
            for i in range(eval_instances_per_class):
                eval_pairs.append((eval_ids[a][i], eval_ids[b][i]))
    return ToyWorld(tuple(classes), mel_cfg, clips, kinds, train_pairs, eval_pairs)
