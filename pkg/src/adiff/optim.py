"""Adam optimizer and the two learning-rate schedules used by the trainer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, Tensor

__all__ = ["AdamState", "adam_step", "LrSchedule", "lr_at"]


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators plus a step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float) -> None:
    """Apply one bias-corrected Adam update in place.

    Parameters with a missing gradient are treated as zero-gradient (their
    accumulators still decay). The step counter increments exactly once per
    call regardless of gradient content.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name!r}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / (1.0 - b1**t)
        vhat = v / (1.0 - b2**t)
        p.data -= (lr * mhat / (np.sqrt(vhat) + state.eps)).astype(p.data.dtype)


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup followed by either step decay or cosine decay.

    The rate is 0 at step 0, reaches ``base`` exactly at ``warmup_steps``,
    and is continuous across the warmup boundary. The cosine branch lands on
    ``floor`` at ``total_steps`` and stays there.
    """

    kind: str  # "warmup_step_decay" | "warmup_cosine"
    base: float
    warmup_steps: int
    total_steps: int
    decay_factor: float = 0.5
    decay_every: int = 0  # step-decay period; 0 means a third of the post-warmup run
    floor: float = 0.0

    def __post_init__(self):
        if self.kind not in ("warmup_step_decay", "warmup_cosine"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.base < 0 or self.floor < 0:
            raise ValueError("rates must be non-negative")
        if self.warmup_steps < 0 or self.total_steps <= 0:
            raise ValueError("step counts must be positive")


def lr_at(schedule: LrSchedule, step: int) -> float:
    """Rate at an optimizer step index. Pure and deterministic."""
    if step < 0:
        raise ValueError("step must be >= 0")
    w = schedule.warmup_steps
    if w > 0 and step < w:
        return schedule.base * step / w
    if schedule.kind == "warmup_step_decay":
        period = schedule.decay_every
        if period <= 0:
            period = max(1, (schedule.total_steps - w) // 3)
        return schedule.base * schedule.decay_factor ** ((step - w) // period)
    # cosine from base down to floor across the post-warmup span
    span = max(1, schedule.total_steps - w)
    t = min(1.0, (step - w) / span)
    return schedule.floor + (schedule.base - schedule.floor) * 0.5 * (1.0 + math.cos(math.pi * t))
