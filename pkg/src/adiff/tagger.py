"""Frame-MLP audio tagger doubling as the frozen audio encoder.

Two per-frame MLP blocks over mel bands feed both a per-class sigmoid head
(the event timeline used for hallucination reporting) and a temporal
mean-pool (the single pooled embedding consumed by the audio mapper). The
tagger is trained once on tag data and then kept frozen; training of the
explanation model never touches these weights, which is what keeps the
timeline trustworthy as an audit signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .audio import MelSpec
from .optim import AdamState, adam_step

__all__ = ["EncoderConfig", "EventTimeline", "AudioEncoder", "tag_events", "train_tagger"]

DEFAULT_CLASSES = (
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


@dataclass(frozen=True)
class EncoderConfig:
    mels: int = 64
    hidden: int = 64
    classes: tuple[str, ...] = DEFAULT_CLASSES

    @property
    def n_classes(self) -> int:
        return len(self.classes)


@dataclass
class EventTimeline:
    """Per-frame, per-class presence probabilities from independent sigmoids."""

    probs: np.ndarray  # [frames, C], each entry in [0, 1]
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float32)
        if self.probs.ndim != 2 or self.probs.shape[1] != len(self.class_names):
            raise ValueError(
                f"timeline shape {self.probs.shape} does not match {len(self.class_names)} classes"
            )
        if self.probs.size and (self.probs.min() < 0.0 or self.probs.max() > 1.0):
            raise ValueError("presence probabilities must lie in [0, 1]")

    def top_events(self, n: int = 3) -> list[tuple[str, float, int]]:
        """Top-n classes by peak probability: (name, peak prob, peak frame)."""
        peaks = self.probs.max(axis=0)
        frames = self.probs.argmax(axis=0)
        order = np.argsort(-peaks, kind="stable")[:n]
        return [(self.class_names[i], float(peaks[i]), int(frames[i])) for i in order]

    def clip_scores(self) -> np.ndarray:
        return self.probs.mean(axis=0)


class AudioEncoder:
    """phi: mel frames -> hidden states -> (pooled embedding, event logits)."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator | None = None, scale: float = 0.05):
        self.config = config
        rng = rng or np.random.default_rng(0)
        h, m, c = config.hidden, config.mels, config.n_classes
        dtype = T.get_default_dtype()

        def init(shape):
            return (rng.standard_normal(shape) * scale).astype(dtype)

        self.params: dict[str, T.Tensor] = {
            "phi.block1.w": T.parameter(init((m, h))),
            "phi.block1.b": T.parameter(np.zeros(h, dtype=dtype)),
            "phi.block2.w": T.parameter(init((h, h))),
            "phi.block2.b": T.parameter(np.zeros(h, dtype=dtype)),
            "phi.head.w": T.parameter(init((h, c))),
            "phi.head.b": T.parameter(np.zeros(c, dtype=dtype)),
        }

    @classmethod
    def zero_init(cls, config: EncoderConfig) -> "AudioEncoder":
        enc = cls(config, scale=0.0)
        return enc

    @property
    def embed_dim(self) -> int:
        return self.config.hidden

    # -- autodiff path (used by gradient checks; phi never trains otherwise)

    def hidden_t(self, mel: MelSpec) -> T.Tensor:
        self._check(mel)
        x = T.constant(mel.values)
        h = T.gelu(x @ self.params["phi.block1.w"] + self.params["phi.block1.b"])
        return T.gelu(h @ self.params["phi.block2.w"] + self.params["phi.block2.b"])

    def embed_t(self, mel: MelSpec) -> T.Tensor:
        """Pooled embedding [1, hidden]: temporal mean of final hidden states."""
        return T.mean_axis(self.hidden_t(mel), axis=0, keepdims=True)

    def clip_logits_t(self, mel: MelSpec) -> T.Tensor:
        """Clip-level class logits [1, C] for tag training."""
        pooled = self.embed_t(mel)
        return pooled @ self.params["phi.head.w"] + self.params["phi.head.b"]

    # -- plain numpy path (equivalent forward, no graph)

    def _np(self, name: str) -> np.ndarray:
        return self.params[name].data

    def _check(self, mel: MelSpec) -> None:
        if mel.values.shape[1] != self.config.mels:
            raise ValueError(
                f"mel band count {mel.values.shape[1]} != encoder input {self.config.mels}"
            )

    def hidden(self, mel: MelSpec) -> np.ndarray:
        self._check(mel)
        h = T.gelu_np(mel.values @ self._np("phi.block1.w") + self._np("phi.block1.b"))
        return T.gelu_np(h @ self._np("phi.block2.w") + self._np("phi.block2.b"))

    def embed(self, mel: MelSpec) -> np.ndarray:
        return self.hidden(mel).mean(axis=0)

    def timeline(self, mel: MelSpec, pool: int = 1) -> EventTimeline:
        """Per-frame sigmoid class probabilities, optionally pooled in time."""
        logits = self.hidden(mel) @ self._np("phi.head.w") + self._np("phi.head.b")
        if pool > 1:
            frames = logits.shape[0] // pool * pool
            logits = logits[:frames].reshape(-1, pool, logits.shape[1]).mean(axis=1)
        probs = 1.0 / (1.0 + np.exp(-logits))
        return EventTimeline(probs, self.config.classes)

    # -- persistence

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            arr = np.asarray(state[k], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()


def tag_events(mel: MelSpec, encoder: AudioEncoder, pool: int = 1) -> EventTimeline:
    """Event presence probabilities over time from the frozen tagger."""
    return encoder.timeline(mel, pool=pool)


def train_tagger(
    encoder: AudioEncoder,
    mels: list[MelSpec],
    tags: np.ndarray,
    epochs: int = 8,
    lr: float = 3e-3,
    rng: np.random.Generator | None = None,
) -> list[float]:
    """Fit the tagger on clip-level multi-hot tags with sigmoid BCE.

    Returns the per-epoch mean loss. This is the only place phi parameters
    ever change; everything downstream treats the encoder as read-only.
    """
    rng = rng or np.random.default_rng(0)
    tags = np.asarray(tags, dtype=T.get_default_dtype())
    if tags.shape != (len(mels), encoder.config.n_classes):
        raise ValueError(f"tags must be [{len(mels)}, {encoder.config.n_classes}], got {tags.shape}")
    state = AdamState()
    curve: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(len(mels))
        total = 0.0
        for i in order:
            T.zero_grads(encoder.params.values())
            logits = encoder.clip_logits_t(mels[i])
            target = T.constant(tags[i : i + 1])
            # BCE with logits: softplus(x) - x * t, averaged over classes
            loss = T.mean_all(T.softplus(logits) - logits * target)
            T.backward(loss, encoder.params.values())
            adam_step(encoder.params, state, lr)
            total += loss.item()
        curve.append(total / len(mels))
    return curve
