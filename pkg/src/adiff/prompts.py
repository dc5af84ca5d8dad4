"""Tiered user-prompt database.

Each explanation tier and each captioning position ("first"/"second") has
its own list of request phrasings; training samples uniformly from the list
so the model stays robust to how the user words the request. The default
database carries at least 100 distinct prompts per tier, generated from
tier-specific templates with disjoint wording pools so tiers never overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["PromptDB", "default_prompt_db", "TIERS", "POSITIONS"]

TIERS = (1, 2, 3)
POSITIONS = ("first", "second")


@dataclass
class PromptDB:
    tiers: dict[int, list[str]] = field(default_factory=dict)
    positions: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        for t, lst in self.tiers.items():
            if t not in TIERS:
                raise ValueError(f"unknown tier {t}")
            if not lst:
                raise ValueError(f"tier {t} prompt list is empty")
        for p, lst in self.positions.items():
            if p not in POSITIONS:
                raise ValueError(f"unknown position {p}")
            if not lst:
                raise ValueError(f"position {p!r} prompt list is empty")

    def sample(self, key, rng: np.random.Generator) -> str:
        """Uniform draw from a tier's (1/2/3) or position's list."""
        lst = self.list_for(key)
        return lst[int(rng.integers(0, len(lst)))]

    def list_for(self, key) -> list[str]:
        if isinstance(key, int) or (isinstance(key, str) and key.isdigit()):
            tier = int(key)
            if tier not in self.tiers:
                raise KeyError(f"no prompts for tier {tier}")
            return self.tiers[tier]
        if key in POSITIONS:
            if key not in self.positions:
                raise KeyError(f"no prompts for position {key!r}")
            return self.positions[key]
        raise KeyError(f"unknown prompt key {key!r}")

    # line format: [tier1] / [tier2] / [tier3] / [first] / [second] markers
    def dumps(self) -> str:
        lines = []
        for t in TIERS:
            lines.append(f"[tier{t}]")
            lines.extend(self.tiers.get(t, []))
        for p in POSITIONS:
            lines.append(f"[{p}]")
            lines.extend(self.positions.get(p, []))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PromptDB":
        tiers: dict[int, list[str]] = {}
        positions: dict[str, list[str]] = {}
        bucket: list[str] | None = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                marker = line[1:-1]
                if marker.startswith("tier"):
                    bucket = tiers.setdefault(int(marker[4:]), [])
                else:
                    bucket = positions.setdefault(marker, [])
            elif bucket is not None:
                bucket.append(line)
        return cls(tiers, positions)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path) -> "PromptDB":
        return cls.loads(open(path, encoding="utf-8").read())


_TIER1_SEED = [
    "Summarize the differences between the two audios briefly.",
    "Highlight the main differences between the two audio tracks.",
    "Provide a concise comparison of the two audios.",
]
_TIER2_SEED = [
    "Explain the contrast between the two audio pieces in one long sentence.",
    "In one elaborate sentence, summarize the differences between both audio files.",
    "Describe the variation between the two audio tracks in one extended sentence.",
]
_TIER3_SEED = [
    "Explain the difference between both audios in detail.",
    "Could you elaborate on the distinctions between the two audio tracks?",
    "Please provide a detailed comparison of both audio files.",
]


def _fill(seed: list[str], templates: list[str], verbs, nouns, things, target: int) -> list[str]:
    out = list(seed)
    seen = set(out)
    for tpl in templates:
        for v in verbs:
            for n in nouns:
                for a in things:
                    s = tpl.format(v=v, n=n, a=a)
                    if s not in seen:
                        seen.add(s)
                        out.append(s)
                    if len(out) >= target:
                        return out
    return out


def default_prompt_db(per_tier: int = 100) -> PromptDB:
    """Build the stock database with >= per_tier prompts for each tier."""
    nouns = ["differences", "main differences", "key differences", "contrasts", "distinctions"]
    things = ["audios", "audio clips", "recordings", "audio tracks", "sound clips"]

    tier1 = _fill(
        _TIER1_SEED,
        [
            "{v} the {n} between the two {a} briefly.",
            "{v} the {n} between these {a} in a few words.",
            "{v} the {n} across the two {a} concisely.",
        ],
        ["Summarize", "State", "List", "Note", "Give", "Outline", "Sketch", "Recap"],
        nouns,
        things,
        per_tier,
    )
    tier2 = _fill(
        _TIER2_SEED,
        [
            "{v} the {n} between the two {a} in one long sentence.",
            "In a single extended sentence, {v} the {n} between the {a}.",
            "{v} the {n} across both {a} in one elaborate sentence.",
        ],
        ["Explain", "Describe", "Lay out", "Spell out", "Summarize", "Characterize", "Cover", "Present"],
        nouns,
        things,
        per_tier,
    )
    tier3 = _fill(
        _TIER3_SEED,
        [
            "{v} the {n} between the two {a} in detail.",
            "{v} the {n} between both {a} thoroughly, covering sources and feel.",
            "In depth, {v} the {n} between these {a}.",
        ],
        ["Explain", "Analyze", "Describe", "Unpack", "Examine", "Dissect", "Detail", "Explore"],
        nouns,
        things,
        per_tier,
    )
    first = [
        "caption the first audio",
        "Describe the first audio.",
        "What is happening in the first audio?",
        "Caption only the first recording.",
        "Give a caption for the first clip.",
        "Write a caption for audio one.",
    ]
    second = [
        "caption the second audio",
        "Describe the second audio.",
        "What is happening in the second audio?",
        "Caption only the second recording.",
        "Give a caption for the second clip.",
        "Write a caption for audio two.",
    ]
    db = PromptDB({1: tier1, 2: tier2, 3: tier3}, {"first": first, "second": second})
    lists = [set(tier1), set(tier2), set(tier3)]
    for i in range(3):
        for j in range(i + 1, 3):
            overlap = lists[i] & lists[j]
            if overlap:
                raise AssertionError(f"tier prompt lists overlap: {sorted(overlap)[:3]}")
    return db
