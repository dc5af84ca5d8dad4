"""Byte-level BPE tokenizer plus the word tokenizer used by the metrics.

The base alphabet is the 256 single bytes, so nothing is ever out of
vocabulary and decode(encode(s)) == s holds for arbitrary input. Training
greedily merges the most frequent adjacent pair; ties break on the
lexicographically smallest (left bytes, right bytes) pair so training is
fully deterministic. The two reserved specials are end-of-text (which also
serves as the latent separator and as padding lookup id) and pad.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

__all__ = ["Vocab", "train_bpe", "metric_tokenize", "N_SPECIALS"]

N_SPECIALS = 2  # end-of-text, pad


@dataclass
class Vocab:
    """Token table: 256 byte tokens, two specials, then learned merges.

    ids are dense in [0, size); end_of_text and pad sit right after the
    byte alphabet so their ids never depend on the merge count.
    """

    merges: list[tuple[bytes, bytes]] = field(default_factory=list)

    def __post_init__(self):
        self.token_bytes: dict[int, bytes] = {i: bytes([i]) for i in range(256)}
        self._ranks: dict[tuple[bytes, bytes], int] = {}
        base = 256 + N_SPECIALS
        for rank, (left, right) in enumerate(self.merges):
            self.token_bytes[base + rank] = left + right
            self._ranks[(left, right)] = rank

    @property
    def end_of_text(self) -> int:
        return 256

    @property
    def pad(self) -> int:
        return 257

    @property
    def size(self) -> int:
        return 256 + N_SPECIALS + len(self.merges)

    # -- encoding

    def encode_bytes(self, raw: bytes) -> list[int]:
        """Apply merges greedily in training priority order."""
        parts = [bytes([b]) for b in raw]
        while len(parts) > 1:
            best_rank = None
            best_i = -1
            for i in range(len(parts) - 1):
                rank = self._ranks.get((parts[i], parts[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_i = i
            if best_rank is None:
                break
            merged = parts[best_i] + parts[best_i + 1]
            # merge every occurrence of this pair in one sweep
            out: list[bytes] = []
            i = 0
            while i < len(parts):
                if (
                    i + 1 < len(parts)
                    and parts[i] == self.merges[best_rank][0]
                    and parts[i + 1] == self.merges[best_rank][1]
                ):
                    out.append(merged)
                    i += 2
                else:
                    out.append(parts[i])
                    i += 1
            parts = out
        ids_by_bytes = {v: k for k, v in self.token_bytes.items()}
        return [ids_by_bytes[p] for p in parts]

    def encode(self, text: str) -> list[int]:
        return self.encode_bytes(text.encode("utf-8"))

    def decode_bytes(self, ids) -> bytes:
        chunks = []
        for i in ids:
            i = int(i)
            if i in (self.end_of_text, self.pad):
                continue
            if i not in self.token_bytes:
                raise ValueError(f"token id {i} out of range for vocab of {self.size}")
            chunks.append(self.token_bytes[i])
        return b"".join(chunks)

    def decode(self, ids) -> str:
        return self.decode_bytes(ids).decode("utf-8", errors="replace")

    # -- serialization: specials in a header block, one merge per line

    def dumps(self) -> str:
        lines = [
            "#bpe-vocab v1",
            f"#special end_of_text {self.end_of_text}",
            f"#special pad {self.pad}",
        ]
        for left, right in self.merges:
            lines.append(f"{left.hex()} {right.hex()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Vocab":
        merges = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            left, right = line.split()
            merges.append((bytes.fromhex(left), bytes.fromhex(right)))
        return cls(merges)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path) -> "Vocab":
        return cls.loads(open(path, encoding="utf-8").read())


def _pair_counts(lines: list[list[bytes]]) -> dict[tuple[bytes, bytes], int]:
    counts: dict[tuple[bytes, bytes], int] = {}
    for parts in lines:
        for i in range(len(parts) - 1):
            pair = (parts[i], parts[i + 1])
            counts[pair] = counts.get(pair, 0) + 1
    return counts


def train_bpe(corpus: list[str], vocab_size: int) -> Vocab:
    """Learn merges until the vocabulary reaches ``vocab_size``.

    Pairs never merge across line boundaries. Runs out of pairs before the
    target only on degenerate corpora, in which case the vocabulary simply
    ends up smaller.
    """
    if not corpus or not any(corpus):
        raise ValueError("cannot train a tokenizer on an empty corpus")
    if vocab_size < 256 + N_SPECIALS:
        raise ValueError(f"vocab_size must be >= {256 + N_SPECIALS}, got {vocab_size}")
    lines = [[bytes([b]) for b in line.encode("utf-8")] for line in corpus if line]
    merges: list[tuple[bytes, bytes]] = []
    while 256 + N_SPECIALS + len(merges) < vocab_size:
        counts = _pair_counts(lines)
        if not counts:
            break
        top = max(counts.values())
        pair = min(p for p, c in counts.items() if c == top)
        merges.append(pair)
        merged = pair[0] + pair[1]
        for li, parts in enumerate(lines):
            out: list[bytes] = []
            i = 0
            while i < len(parts):
                if i + 1 < len(parts) and parts[i] == pair[0] and parts[i + 1] == pair[1]:
                    out.append(merged)
                    i += 2
                else:
                    out.append(parts[i])
                    i += 1
            lines[li] = out
    return Vocab(merges)


_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def metric_tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()
