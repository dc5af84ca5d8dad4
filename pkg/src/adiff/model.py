"""The difference-explanation network.

Two pooled audio embeddings are expanded by a mapping network into latent
token sequences, joined by a separator token (the end-of-text embedding)
and the projected prompt, mixed by a cross-projection transformer, and fed
as a prefix to a causal decoder that generates the explanation. Parameters
split into five named groups so training stages can freeze precisely:

  phi    audio encoder (owned by the AudioEncoder, frozen everywhere)
  zeta   audio and text mapping networks
  psi    the vocabulary embedding table
  beta   cross-projection transformer
  theta  decoder body, position table, and output head
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .checkpoint import load_arrays, save_arrays
from .tagger import AudioEncoder

__all__ = ["ModelConfig", "PrefixAssembly", "DiffExplainer", "nearest_vocab", "PARAM_GROUPS"]

PARAM_GROUPS = ("phi", "zeta", "psi", "beta", "theta")

SCALE_DEPTHS = {"base": 2, "med": 4, "large": 8, "xl": 12}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs. Defaults follow the reference setup: 40 latent
    tokens per audio, 40 text tokens, one separator, so the assembled prefix
    is 121 tokens long."""

    dim: int = 128
    audio_prefix_len: int = 40  # s: latent tokens per audio
    text_prefix_len: int = 40
    proj_depth: int = 8
    cross_depth: int = 4
    decoder_depth: int = 4
    heads: int = 4
    vocab_size: int = 2000
    encoder_dim: int = 64
    mapper_const_len: int = 8
    cross_const_len: int = 8
    mlp_mult: int = 4
    max_context: int = 512
    use_cross_projection: bool = True
    project_text_prompt: bool = True  # False: feed raw prompt embeddings (literal mode)

    def __post_init__(self):
        for name in ("proj_depth", "cross_depth", "decoder_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.audio_prefix_len < 1 or self.text_prefix_len < 1:
            raise ValueError("prefix lengths must be >= 1")
        if self.vocab_size < 258:
            raise ValueError("vocab_size must cover the byte alphabet plus specials (>= 258)")

    @property
    def expansion(self) -> int:
        """Mapper output width before the reshape: k = s * d."""
        return self.audio_prefix_len * self.dim

    @property
    def prefix_len(self) -> int:
        """Assembled prefix length: audio + separator + audio + text."""
        return 2 * self.audio_prefix_len + 1 + self.text_prefix_len

    @classmethod
    def scaled(cls, scale: str, **overrides) -> "ModelConfig":
        """Decoder-size sweep: base/med/large/xl at 2/4/8/12 layers."""
        if scale not in SCALE_DEPTHS:
            raise ValueError(f"unknown scale {scale!r}; pick from {sorted(SCALE_DEPTHS)}")
        return cls(decoder_depth=SCALE_DEPTHS[scale], **overrides)


@dataclass
class PrefixAssembly:
    """The ordered latent prefix before and after cross-projection.

    Block boundaries partition [0, prefix_len): first audio, the single
    separator row, second audio, then the text block.
    """

    pre_cross: T.Tensor
    bounds: dict[str, tuple[int, int]]
    post_cross: T.Tensor | None = None

    def __post_init__(self):
        lo, hi = self.bounds["separator"]
        if hi - lo != 1:
            raise ValueError("the separator block must be exactly one row")
        edges = sorted(self.bounds.values())
        if edges[0][0] != 0 or edges[-1][1] != self.pre_cross.shape[0]:
            raise ValueError("block boundaries must cover the full prefix")
        for (_, a_hi), (b_lo, _) in zip(edges, edges[1:]):
            if a_hi != b_lo:
                raise ValueError("block boundaries must tile the prefix without gaps")
        if self.post_cross is not None and self.post_cross.shape != self.pre_cross.shape:
            raise ValueError("pre- and post-cross sequences must have equal shape")

    @property
    def length(self) -> int:
        return self.pre_cross.shape[0]

    @property
    def prefix(self) -> T.Tensor:
        if self.post_cross is None:
            raise ValueError("cross_project has not been applied to this assembly")
        return self.post_cross


# ---------------------------------------------------------------------------
# building blocks


def _init(rng: np.random.Generator, shape, scale: float):
    return (rng.standard_normal(shape) * scale).astype(T.get_default_dtype())


def _zeros(shape):
    return np.zeros(shape, dtype=T.get_default_dtype())


def _ones(shape):
    return np.ones(shape, dtype=T.get_default_dtype())


class TransformerStack:
    """Pre-norm transformer blocks over a [T, dim] sequence (no batching;
    desk-scale graphs run one sample at a time)."""

    def __init__(self, prefix: str, depth: int, dim: int, heads: int, mlp_mult: int,
                 rng: np.random.Generator, params: dict[str, T.Tensor]):
        self.prefix = prefix
        self.depth = depth
        self.dim = dim
        self.heads = heads
        self.params = params
        scale = 0.02
        hidden = dim * mlp_mult
        for i in range(depth):
            p = f"{prefix}.block{i}"
            params[f"{p}.ln1.g"] = T.parameter(_ones(dim))
            params[f"{p}.ln1.b"] = T.parameter(_zeros(dim))
            for proj in ("q", "k", "v", "o"):
                params[f"{p}.attn.w{proj}"] = T.parameter(_init(rng, (dim, dim), scale))
                params[f"{p}.attn.b{proj}"] = T.parameter(_zeros(dim))
            params[f"{p}.ln2.g"] = T.parameter(_ones(dim))
            params[f"{p}.ln2.b"] = T.parameter(_zeros(dim))
            params[f"{p}.mlp.w1"] = T.parameter(_init(rng, (dim, hidden), scale))
            params[f"{p}.mlp.b1"] = T.parameter(_zeros(hidden))
            params[f"{p}.mlp.w2"] = T.parameter(_init(rng, (hidden, dim), scale))
            params[f"{p}.mlp.b2"] = T.parameter(_zeros(dim))

    def _ln(self, x: T.Tensor, name: str) -> T.Tensor:
        return T.layer_norm(x) * self.params[f"{name}.g"] + self.params[f"{name}.b"]

    def _attend(self, x: T.Tensor, block: str, causal: bool) -> T.Tensor:
        p = self.params
        n = x.shape[0]
        dh = self.dim // self.heads
        q = x @ p[f"{block}.attn.wq"] + p[f"{block}.attn.bq"]
        k = x @ p[f"{block}.attn.wk"] + p[f"{block}.attn.bk"]
        v = x @ p[f"{block}.attn.wv"] + p[f"{block}.attn.bv"]
        mask = None
        if causal:
            mask = T.constant(np.triu(np.full((n, n), -1e9, dtype=x.data.dtype), k=1))
        heads_out = []
        for h in range(self.heads):
            lo, hi = h * dh, (h + 1) * dh
            qh = T.slice_axis(q, 1, lo, hi)
            kh = T.slice_axis(k, 1, lo, hi)
            vh = T.slice_axis(v, 1, lo, hi)
            scores = (qh @ T.transpose(kh)) * (1.0 / math.sqrt(dh))
            if mask is not None:
                scores = scores + mask
            heads_out.append(T.softmax(scores, axis=-1) @ vh)
        merged = T.concat(heads_out, axis=1)
        return merged @ p[f"{block}.attn.wo"] + p[f"{block}.attn.bo"]

    def __call__(self, x: T.Tensor, causal: bool = False) -> T.Tensor:
        for i in range(self.depth):
            block = f"{self.prefix}.block{i}"
            x = x + self._attend(self._ln(x, f"{block}.ln1"), block, causal)
            h = self._ln(x, f"{block}.ln2")
            h = T.gelu(h @ self.params[f"{block}.mlp.w1"] + self.params[f"{block}.mlp.b1"])
            x = x + (h @ self.params[f"{block}.mlp.w2"] + self.params[f"{block}.mlp.b2"])
        return x


# ---------------------------------------------------------------------------
# the model


class DiffExplainer:
    """Full network over a frozen audio encoder.

    All parameters live in one flat name -> Tensor dict; the name's first
    dot-component is its group, which the freezing machinery and the
    checkpoint sidecar rely on.
    """

    def __init__(self, config: ModelConfig, encoder: AudioEncoder, seed: int = 0):
        if encoder.embed_dim != config.encoder_dim:
            raise ValueError(
                f"encoder embedding dim {encoder.embed_dim} != config.encoder_dim {config.encoder_dim}"
            )
        self.config = config
        self.encoder = encoder
        self.trained_stages: set[int] = set()
        rng = np.random.default_rng(seed)
        c = config
        self.params: dict[str, T.Tensor] = dict(encoder.params)

        p = self.params
        # zeta: audio mapper (expand linear + constant + transformer)
        p["zeta.audio.expand.w"] = T.parameter(_init(rng, (c.encoder_dim, c.expansion), 0.02))
        p["zeta.audio.expand.b"] = T.parameter(_zeros(c.expansion))
        p["zeta.audio.const"] = T.parameter(_init(rng, (c.mapper_const_len, c.dim), 0.02))
        self.audio_stack = TransformerStack("zeta.audio", c.proj_depth, c.dim, c.heads, c.mlp_mult, rng, p)
        # zeta: text mapper (same scheme, no expand linear)
        p["zeta.text.const"] = T.parameter(_init(rng, (c.mapper_const_len, c.dim), 0.02))
        self.text_stack = TransformerStack("zeta.text", c.proj_depth, c.dim, c.heads, c.mlp_mult, rng, p)
        # psi: vocabulary embeddings
        p["psi.vocab"] = T.parameter(_init(rng, (c.vocab_size, c.dim), 0.02))
        # beta: cross-projection; its own position table makes the block
        # layout (audio1 / separator / audio2 / text) visible to attention
        p["beta.const"] = T.parameter(_init(rng, (c.cross_const_len, c.dim), 0.02))
        p["beta.pos"] = T.parameter(_init(rng, (c.prefix_len + c.cross_const_len, c.dim), 0.02))
        self.cross_stack = TransformerStack("beta.cross", c.cross_depth, c.dim, c.heads, c.mlp_mult, rng, p)
        # theta: decoder body + head
        p["theta.pos"] = T.parameter(_init(rng, (c.max_context, c.dim), 0.02))
        self.decoder_stack = TransformerStack("theta.dec", c.decoder_depth, c.dim, c.heads, c.mlp_mult, rng, p)
        p["theta.lnf.g"] = T.parameter(_ones(c.dim))
        p["theta.lnf.b"] = T.parameter(_zeros(c.dim))
        p["theta.head.w"] = T.parameter(_init(rng, (c.dim, c.vocab_size), 0.02))
        p["theta.head.b"] = T.parameter(_zeros(c.vocab_size))

        for name in p:
            if name.split(".", 1)[0] not in PARAM_GROUPS:
                raise AssertionError(f"parameter {name!r} has no group prefix")

    # -- parameter bookkeeping

    def group_of(self, name: str) -> str:
        return name.split(".", 1)[0]

    def groups(self) -> dict[str, str]:
        return {name: self.group_of(name) for name in self.params}

    def params_in(self, groups) -> dict[str, T.Tensor]:
        wanted = set(groups)
        return {n: p for n, p in self.params.items() if self.group_of(n) in wanted}

    @property
    def end_of_text(self) -> int:
        return 256  # fixed reserved id right after the byte alphabet

    # -- forward pieces

    def project_audio(self, pooled) -> T.Tensor:
        """Pooled embedding -> [s, dim] latent tokens.

        Linear expansion to s*d, reshape, append the learnable constant
        rows, run the mapper transformer, then drop the constant rows and
        keep the s data rows.
        """
        c = self.config
        if isinstance(pooled, np.ndarray):
            pooled = T.constant(pooled.reshape(1, -1))
        if pooled.shape != (1, c.encoder_dim):
            raise T.ShapeError(f"pooled embedding must be [1, {c.encoder_dim}], got {pooled.shape}")
        x = pooled @ self.params["zeta.audio.expand.w"] + self.params["zeta.audio.expand.b"]
        x = T.reshape(x, (c.audio_prefix_len, c.dim))
        x = T.concat([x, self.params["zeta.audio.const"]], axis=0)
        x = self.audio_stack(x)
        return T.slice_axis(x, 0, 0, c.audio_prefix_len)

    def prepare_prompt_ids(self, ids: list[int]) -> list[int]:
        """Right-pad with end-of-text to the text prefix length; truncate over-length."""
        c = self.config
        ids = list(ids)[: c.text_prefix_len]
        return ids + [self.end_of_text] * (c.text_prefix_len - len(ids))

    def project_text(self, prompt_ids: list[int]) -> T.Tensor:
        """Prompt embeddings -> [text_len, dim], length preserved."""
        c = self.config
        ids = self.prepare_prompt_ids(prompt_ids)
        emb = T.embedding(self.params["psi.vocab"], ids)
        if not c.project_text_prompt:
            return emb
        x = T.concat([emb, self.params["zeta.text.const"]], axis=0)
        x = self.text_stack(x)
        return T.slice_axis(x, 0, 0, c.text_prefix_len)

    def assemble_prefix(self, lat1: T.Tensor, lat2: T.Tensor, text_lat: T.Tensor) -> PrefixAssembly:
        """Concatenate [audio1 | separator | audio2 | text] in latent space."""
        c = self.config
        s = c.audio_prefix_len
        for lat in (lat1, lat2):
            if lat.shape != (s, c.dim):
                raise T.ShapeError(f"audio latent must be [{s}, {c.dim}], got {lat.shape}")
        if text_lat.shape != (c.text_prefix_len, c.dim):
            raise T.ShapeError(
                f"text latent must be [{c.text_prefix_len}, {c.dim}], got {text_lat.shape}"
            )
        sep = T.embedding(self.params["psi.vocab"], [self.end_of_text])
        pre = T.concat([lat1, sep, lat2, text_lat], axis=0)
        bounds = {
            "audio1": (0, s),
            "separator": (s, s + 1),
            "audio2": (s + 1, 2 * s + 1),
            "text": (2 * s + 1, 2 * s + 1 + c.text_prefix_len),
        }
        return PrefixAssembly(pre, bounds)

    def cross_project(self, assembly: PrefixAssembly) -> PrefixAssembly:
        """Mix the assembled prefix; length is preserved.

        With cross-projection disabled (the ablation path) the post-cross
        sequence is the pre-cross sequence itself, bit for bit.
        """
        if not self.config.use_cross_projection:
            assembly.post_cross = assembly.pre_cross
            return assembly
        k = assembly.length
        x = T.concat([assembly.pre_cross, self.params["beta.const"]], axis=0)
        x = x + T.slice_axis(self.params["beta.pos"], 0, 0, x.shape[0])
        x = self.cross_stack(x)
        assembly.post_cross = T.slice_axis(x, 0, 0, k)
        return assembly

    def forward_prefix(self, pooled1, pooled2, prompt_ids: list[int]) -> PrefixAssembly:
        """Embeddings + prompt -> cross-projected assembly, ready to decode."""
        lat1 = self.project_audio(pooled1)
        lat2 = self.project_audio(pooled2)
        text_lat = self.project_text(prompt_ids)
        return self.cross_project(self.assemble_prefix(lat1, lat2, text_lat))

    def _decode_states(self, assembly: PrefixAssembly, generated: list[int]) -> T.Tensor:
        c = self.config
        prefix = assembly.prefix
        parts = [prefix]
        if generated:
            if max(generated) >= c.vocab_size or min(generated) < 0:
                raise ValueError("generated token id out of vocabulary range")
            parts.append(T.embedding(self.params["psi.vocab"], generated))
        x = T.concat(parts, axis=0) if len(parts) > 1 else parts[0]
        n = x.shape[0]
        if n > c.max_context:
            raise ValueError(f"context of {n} tokens exceeds decoder max length {c.max_context}")
        x = x + T.slice_axis(self.params["theta.pos"], 0, 0, n)
        x = self.decoder_stack(x, causal=True)
        x = T.layer_norm(x) * self.params["theta.lnf.g"] + self.params["theta.lnf.b"]
        return x @ self.params["theta.head.w"] + self.params["theta.head.b"]

    def next_token_logits(self, assembly: PrefixAssembly, generated: list[int]) -> T.Tensor:
        """Logits over the vocabulary, one row per context position.

        The last row conditions the next token; the causal mask keeps every
        row independent of later generated positions.
        """
        return self._decode_states(assembly, list(generated))

    def sequence_loss(self, batch) -> T.Tensor:
        """Mean over the batch of the summed per-token cross-entropy.

        ``batch`` holds (assembly, target id list) tuples; targets end with
        end-of-text. Prefix positions contribute nothing: the first scored
        position is the one right after the prefix.
        """
        if not batch:
            raise ValueError("empty batch")
        losses = []
        for assembly, target in batch:
            target = list(target)
            if not target:
                raise ValueError("targets must be non-empty")
            if max(target) >= self.config.vocab_size or min(target) < 0:
                raise ValueError("target token id out of vocabulary range")
            logits = self._decode_states(assembly, target[:-1])
            k = assembly.length
            rows = T.slice_axis(logits, 0, k - 1, k - 1 + len(target))
            logprobs = T.log_softmax(rows, axis=-1)
            picked = T.take_per_row(logprobs, target)
            losses.append(T.sum_all(picked) * -1.0)
        total = losses[0]
        for other in losses[1:]:
            total = total + other
        return total * (1.0 / len(batch))

    def lm_loss(self, batch, offsets=None) -> T.Tensor:
        """Unconditional next-token loss over raw token sequences.

        Stage-1 pretraining path: no audio, no prefix; each sequence is
        consumed with end-of-text as the start symbol, so only psi and
        theta participate. ``offsets`` optionally places each sequence at a
        later position index, so pretraining covers the positions the
        prefix will occupy once audio conditioning is attached.
        """
        if not batch:
            raise ValueError("empty batch")
        c = self.config
        if offsets is None:
            offsets = [0] * len(batch)
        losses = []
        for target, offset in zip(batch, offsets):
            target = list(target)
            if not target:
                raise ValueError("targets must be non-empty")
            ids = [self.end_of_text] + target
            if offset + len(ids) > c.max_context:
                raise ValueError(f"sequence of {len(ids)} tokens exceeds max context {c.max_context}")
            x = T.embedding(self.params["psi.vocab"], ids[:-1])
            x = x + T.slice_axis(self.params["theta.pos"], 0, offset, offset + len(ids) - 1)
            x = self.decoder_stack(x, causal=True)
            x = T.layer_norm(x) * self.params["theta.lnf.g"] + self.params["theta.lnf.b"]
            logits = x @ self.params["theta.head.w"] + self.params["theta.head.b"]
            logprobs = T.log_softmax(logits, axis=-1)
            picked = T.take_per_row(logprobs, target)
            losses.append(T.sum_all(picked) * -1.0)
        total = losses[0]
        for other in losses[1:]:
            total = total + other
        return total * (1.0 / len(batch))

    # -- persistence

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        if missing:
            raise ValueError(f"checkpoint is missing parameters: {sorted(missing)[:4]}...")
        for k, p in self.params.items():
            arr = np.asarray(state[k], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()

    def save(self, path) -> None:
        """Write the binary checkpoint plus the group-membership sidecar."""
        save_arrays(self.state_dict(), path)
        with open(f"{path}.groups.txt", "w", encoding="utf-8") as f:
            for name in sorted(self.params):
                f.write(f"{name} {self.group_of(name)}\n")

    def load(self, path) -> None:
        self.load_state_dict(load_arrays(path))

    def clone_params(self) -> dict[str, np.ndarray]:
        return self.state_dict()


def nearest_vocab(latent, table) -> int:
    """Closest vocabulary row by cosine similarity; ties take the lowest id.

    Both sides are L2-normalized, so the answer is invariant under positive
    scaling of the latent. A zero-norm latent has no direction and is an
    error.
    """
    vec = latent.data if isinstance(latent, T.Tensor) else np.asarray(latent)
    vec = vec.reshape(-1).astype(np.float64)
    emb = table.data if isinstance(table, T.Tensor) else np.asarray(table)
    if vec.shape[0] != emb.shape[1]:
        raise T.ShapeError(f"latent dim {vec.shape[0]} != embedding dim {emb.shape[1]}")
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ValueError("cannot take the nearest vocabulary row of a zero latent")
    emb64 = emb.astype(np.float64)
    row_norms = np.linalg.norm(emb64, axis=1)
    row_norms[row_norms == 0.0] = np.inf  # zero rows can never win
    sims = (emb64 @ (vec / norm)) / row_norms
    return int(np.argmax(sims))
