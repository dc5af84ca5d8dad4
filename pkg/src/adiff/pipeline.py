"""Bundled system: feature config, tokenizer, prompts, encoder, and model.

A system directory holds everything needed to go from two WAV files to an
explanation string: ``model.ckpt`` (all parameter groups in the binary
format, with the group sidecar), ``vocab.txt``, ``prompts.txt``, and
``config.txt`` (key = value fields for the model, features, and encoder,
plus which training stages have completed).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, MelConfig, mel_spectrogram, resample, truncate_random
from .decoding import DecodeConfig, decode
from .model import DiffExplainer, ModelConfig
from .prompts import PromptDB, default_prompt_db
from .tagger import AudioEncoder, EncoderConfig
from .tokenizer import Vocab

__all__ = ["System", "save_system", "load_system"]


@dataclass
class System:
    config: ModelConfig
    mel_config: MelConfig
    vocab: Vocab
    prompts: PromptDB
    model: DiffExplainer

    @property
    def encoder(self) -> AudioEncoder:
        return self.model.encoder

    def features(self, clip: AudioClip, seconds: float | None = 10.0, rng=None):
        """Resample to the feature rate and truncate/pad to a fixed window."""
        clip = resample(clip, self.mel_config.sample_rate)
        if seconds is not None:
            rng = rng or np.random.default_rng(0)
            clip = truncate_random(clip, seconds, rng)
        return mel_spectrogram(clip, self.mel_config)

    def embed_clip(self, clip: AudioClip, seconds: float | None = 10.0, rng=None) -> np.ndarray:
        return self.encoder.embed(self.features(clip, seconds, rng))

    def explain(
        self,
        clip1: AudioClip,
        clip2: AudioClip,
        tier: int = 1,
        prompt: str | None = None,
        decode_config: DecodeConfig | None = None,
        seconds: float | None = 10.0,
        seed: int = 0,
    ) -> str:
        """End to end: two clips and a tier (or explicit prompt) to text."""
        rng = np.random.default_rng(seed)
        decode_config = decode_config or DecodeConfig(seed=seed)
        if prompt is None:
            prompt = self.prompts.sample(tier, rng)
        e1 = self.embed_clip(clip1, seconds, rng)
        e2 = self.embed_clip(clip2, seconds, rng)
        assembly = self.model.forward_prefix(e1, e2, self.vocab.encode(prompt))
        tokens = decode(self.model, assembly, decode_config, rng)
        return self.vocab.decode(tokens)


def _write_config(path: Path, system: System) -> None:
    lines = ["# system config"]
    for key, value in asdict(system.config).items():
        lines.append(f"model.{key} = {value}")
    for key, value in asdict(system.mel_config).items():
        lines.append(f"mel.{key} = {value}")
    enc = system.encoder.config
    lines.append(f"encoder.mels = {enc.mels}")
    lines.append(f"encoder.hidden = {enc.hidden}")
    lines.append(f"encoder.classes = {','.join(enc.classes)}")
    stages = ",".join(str(s) for s in sorted(system.model.trained_stages))
    lines.append(f"trained_stages = {stages}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_config(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


_BOOL = {"True": True, "False": False}


def _coerce(value: str):
    if value in _BOOL:
        return _BOOL[value]
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def save_system(system: System, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    system.model.save(directory / "model.ckpt")
    system.vocab.save(directory / "vocab.txt")
    system.prompts.save(directory / "prompts.txt")
    _write_config(directory / "config.txt", system)


def load_system(directory) -> System:
    directory = Path(directory)
    ckpt = directory / "model.ckpt"
    if not ckpt.exists():
        raise FileNotFoundError(f"no checkpoint at {ckpt}")
    fields = _parse_config((directory / "config.txt").read_text(encoding="utf-8"))

    model_kwargs = {
        k.split(".", 1)[1]: _coerce(v) for k, v in fields.items() if k.startswith("model.")
    }
    config = ModelConfig(**model_kwargs)
    mel_kwargs = {k.split(".", 1)[1]: _coerce(v) for k, v in fields.items() if k.startswith("mel.")}
    if mel_kwargs.get("fmax") == "None":
        mel_kwargs["fmax"] = None
    mel_config = MelConfig(**mel_kwargs)
    enc_config = EncoderConfig(
        mels=int(fields["encoder.mels"]),
        hidden=int(fields["encoder.hidden"]),
        classes=tuple(fields["encoder.classes"].split(",")),
    )
    encoder = AudioEncoder(enc_config)
    model = DiffExplainer(config, encoder)
    model.load(ckpt)
    stages = fields.get("trained_stages", "")
    model.trained_stages = {int(s) for s in stages.split(",") if s}
    vocab = Vocab.load(directory / "vocab.txt")
    prompts = PromptDB.load(directory / "prompts.txt")
    return System(config, mel_config, vocab, prompts, model)
