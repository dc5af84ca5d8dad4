"""Autoregressive generation: greedy and combined top-k / top-p sampling.

The sampling filter applies top-k first, then keeps the smallest
descending-probability prefix whose cumulative mass reaches p (the token
crossing the threshold is included), renormalizes, and samples. End-of-text
is exempt from the nucleus cut when it survives top-k, so generation can
always terminate once the model favors stopping; with k=1 the support is a
singleton and sampling coincides with greedy decoding exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DiffExplainer, PrefixAssembly

__all__ = ["DecodeConfig", "greedy_decode", "topk_topp_decode", "topk_topp_support", "step_sample"]


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "topk-topp"  # "greedy" | "topk-topp"
    k: int = 3
    p: float = 0.8
    temperature: float = 1.0
    max_new_tokens: int = 120
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("greedy", "topk-topp"):
            raise ValueError(f"unknown decode mode {self.mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")


def _next_probs(model: DiffExplainer, assembly: PrefixAssembly, generated, temperature: float):
    logits = model.next_token_logits(assembly, generated).data[-1].astype(np.float64)
    logits = logits / temperature
    logits -= logits.max()
    e = np.exp(logits)
    return e / e.sum()


def topk_topp_support(probs: np.ndarray, k: int, p: float, keep_id: int | None = None):
    """Token ids surviving the top-k filter then the nucleus filter.

    Sorting is stable on descending probability, so probability ties
    resolve toward lower ids. The nucleus keeps the smallest prefix with
    cumulative mass >= p, inclusive of the crossing token. ``keep_id``
    (end-of-text in practice) is retained through the nucleus stage
    whenever it survived the top-k stage.
    """
    order = np.argsort(-probs, kind="stable")[: max(1, k)]
    cum = np.cumsum(probs[order])
    cut = int(np.searchsorted(cum, p - 1e-12)) + 1
    kept = list(order[:cut])
    if keep_id is not None and keep_id in set(order.tolist()) and keep_id not in kept:
        kept.append(keep_id)
    return np.array(kept, dtype=np.int64)


def step_sample(
    probs: np.ndarray,
    k: int,
    p: float,
    rng: np.random.Generator,
    keep_id: int | None = None,
) -> int:
    """One filtered sampling step over a probability vector."""
    support = topk_topp_support(probs, k, p, keep_id)
    mass = probs[support]
    mass = mass / mass.sum()
    return int(rng.choice(support, p=mass))


def greedy_decode(model: DiffExplainer, assembly: PrefixAssembly, config: DecodeConfig) -> list[int]:
    """Argmax decoding; stops at end-of-text or the token budget."""
    eot = model.end_of_text
    out: list[int] = []
    for _ in range(config.max_new_tokens):
        probs = _next_probs(model, assembly, out, config.temperature)
        token = int(np.argmax(probs))
        out.append(token)
        if token == eot:
            break
    return out


def topk_topp_decode(
    model: DiffExplainer,
    assembly: PrefixAssembly,
    config: DecodeConfig,
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Sampled decoding under the combined top-k / top-p filter.

    Deterministic for a fixed (seed, model, prefix, config); the rng
    argument overrides the config seed when supplied.
    """
    rng = rng or np.random.default_rng(config.seed)
    eot = model.end_of_text
    out: list[int] = []
    for _ in range(config.max_new_tokens):
        probs = _next_probs(model, assembly, out, config.temperature)
        token = step_sample(probs, config.k, config.p, rng, keep_id=eot)
        out.append(token)
        if token == eot:
            break
    return out


def decode(model, assembly, config: DecodeConfig, rng=None) -> list[int]:
    if config.mode == "greedy":
        return greedy_decode(model, assembly, config)
    return topk_topp_decode(model, assembly, config, rng)
