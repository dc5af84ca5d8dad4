"""Corpus-level caption metrics: BLEU 1-4, ROUGE-L, METEOR-lite, CIDEr, SPIDEr.

All scorers work on pre-tokenized word lists (see ``metric_tokenize``) and
aggregate over a corpus of (candidate, references) pairs. METEOR here is
the exact-match variant: no stemming or synonym tables, which every report
flags. SPICE needs a semantic parser and stays a pluggable hook; SPIDEr
degrades to CIDEr/2 with a flag when no SPICE scorer is supplied.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .tokenizer import metric_tokenize

__all__ = [
    "EvalPair",
    "MetricReport",
    "bleu",
    "rouge_l",
    "meteor_lite",
    "cider",
    "spider",
    "evaluate_pairs",
    "pairs_from_texts",
    "corpus_stats",
    "CorpusStats",
]

METRIC_COLUMNS = (
    "BLEU1",
    "BLEU2",
    "BLEU3",
    "BLEU4",
    "METEOR",
    "ROUGE-L",
    "CIDEr",
    "SPICE",
    "SPIDEr",
)


@dataclass(frozen=True)
class EvalPair:
    """One scored item: a candidate word list and >= 1 reference word lists."""

    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.references:
            raise ValueError("every eval pair needs at least one reference")
        if any(len(r) == 0 for r in self.references):
            raise ValueError("references must be non-empty")


def pairs_from_texts(candidates: list[str], references: list[list[str]]) -> list[EvalPair]:
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} reference sets")
    return [
        EvalPair(tuple(metric_tokenize(c)), tuple(tuple(metric_tokenize(r)) for r in refs))
        for c, refs in zip(candidates, references)
    ]


def _ngrams(words, n: int) -> Counter:
    return Counter(tuple(words[i : i + n]) for i in range(len(words) - n + 1))


# ---------------------------------------------------------------------------
# BLEU


def bleu(pairs: list[EvalPair], n: int = 4) -> float:
    """Corpus BLEU-n: clipped n-gram precision, geometric mean over orders
    1..n, brevity penalty exp(1 - r/c) when the candidate is not longer than
    the closest reference."""
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be in 1..4, got {n}")
    numer = [0] * n
    denom = [0] * n
    cand_len = 0
    ref_len = 0
    for pair in pairs:
        c = pair.candidate
        cand_len += len(c)
        # closest reference length; ties pick the shorter
        ref_len += min((abs(len(r) - len(c)), len(r)) for r in pair.references)[1]
        for k in range(1, n + 1):
            cand_counts = _ngrams(c, k)
            if not cand_counts:
                continue
            max_ref: Counter = Counter()
            for r in pair.references:
                for g, cnt in _ngrams(r, k).items():
                    if cnt > max_ref[g]:
                        max_ref[g] = cnt
            numer[k - 1] += sum(min(cnt, max_ref[g]) for g, cnt in cand_counts.items())
            denom[k - 1] += sum(cand_counts.values())
    precisions = [numer[k] / denom[k] if denom[k] else 0.0 for k in range(n)]
    if min(precisions) <= 0.0 or cand_len == 0:
        return 0.0
    log_mean = sum(math.log(p) for p in precisions) / n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return bp * math.exp(log_mean)


# ---------------------------------------------------------------------------
# ROUGE-L


def _lcs_len(a, b) -> int:
    # classic DP table, O(|a| * |b|)
    rows = len(a)
    cols = len(b)
    prev = [0] * (cols + 1)
    for i in range(1, rows + 1):
        cur = [0] * (cols + 1)
        ai = a[i - 1]
        for j in range(1, cols + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[cols]


def rouge_l(pairs: list[EvalPair], beta: float = 1.2) -> float:
    """Mean over the corpus of the best-reference LCS F-measure."""
    if not pairs:
        return 0.0
    total = 0.0
    for pair in pairs:
        c = pair.candidate
        best = 0.0
        if c:
            for r in pair.references:
                lcs = _lcs_len(c, r)
                if lcs == 0:
                    continue
                prec = lcs / len(c)
                rec = lcs / len(r)
                f = (1 + beta**2) * prec * rec / (rec + beta**2 * prec)
                best = max(best, f)
        total += best
    return total / len(pairs)


# ---------------------------------------------------------------------------
# METEOR-lite


def _min_chunks(cand, ref, match_counts: Counter, node_cap: int = 250_000) -> int:
    """Fewest chunks over all maximum exact-match 1-1 alignments.

    Branch-and-bound over candidate positions: each occurrence of a matched
    word either consumes one of the word's remaining matches (paired with an
    unused reference slot) or burns one of its allowed skips. Chunk count
    increments whenever consecutive matched pairs are not adjacent in both
    sentences. Degenerate inputs that blow past ``node_cap`` fall back to a
    first-fit alignment, which is only reachable far beyond caption lengths.
    """
    ref_slots: dict[str, list[int]] = {}
    for j, w in enumerate(ref):
        ref_slots.setdefault(w, []).append(j)
    cand_counts = Counter(cand)
    skips_allowed = {w: cand_counts[w] - match_counts[w] for w in match_counts}
    total_matches = sum(match_counts.values())

    best = total_matches + 1  # upper bound: every match its own chunk
    nodes = 0

    def greedy() -> int:
        used: set[int] = set()
        chunks = 0
        prev_i = prev_j = -10
        remaining = dict(match_counts)
        for i, w in enumerate(cand):
            if remaining.get(w, 0) <= 0:
                continue
            pick = None
            if prev_j + 1 in ref_slots.get(w, []) and prev_j + 1 not in used and prev_i == i - 1:
                pick = prev_j + 1
            else:
                for j in ref_slots.get(w, []):
                    if j not in used:
                        pick = j
                        break
            if pick is None:
                continue
            used.add(pick)
            remaining[w] -= 1
            if not (i == prev_i + 1 and pick == prev_j + 1):
                chunks += 1
            prev_i, prev_j = i, pick
        return chunks

    def search(i: int, remaining: dict, skips: dict, used: frozenset, prev_i: int, prev_j: int, chunks: int):
        nonlocal best, nodes
        nodes += 1
        if nodes > node_cap:
            raise RecursionError
        if chunks >= best:
            return
        left = sum(remaining.values())
        if left == 0:
            best = min(best, chunks)
            return
        if i >= len(cand) or left > len(cand) - i:
            return
        w = cand[i]
        need = remaining.get(w, 0)
        if need > 0:
            # adjacent continuation first: it cannot increase the chunk count
            ordered = ref_slots[w]
            if prev_i == i - 1 and prev_j + 1 in ordered and prev_j + 1 not in used:
                ordered = [prev_j + 1] + [j for j in ordered if j != prev_j + 1]
            for j in ordered:
                if j in used:
                    continue
                new_chunks = chunks + (0 if (i == prev_i + 1 and j == prev_j + 1) else 1)
                r2 = dict(remaining)
                r2[w] = need - 1
                search(i + 1, r2, skips, used | {j}, i, j, new_chunks)
        if remaining.get(w, 0) == 0 or skips.get(w, 0) > 0:
            s2 = skips
            if w in skips and remaining.get(w, 0) > 0:
                s2 = dict(skips)
                s2[w] -= 1
            search(i + 1, remaining, s2, used, prev_i, prev_j, chunks)

    if total_matches == 0:
        return 0
    try:
        search(0, dict(match_counts), dict(skips_allowed), frozenset(), -10, -10, 0)
        return best
    except RecursionError:
        return greedy()


def _meteor_single(cand, ref) -> float:
    if not cand or not ref:
        return 0.0
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    match_counts = Counter(
        {w: min(cand_counts[w], ref_counts[w]) for w in cand_counts if w in ref_counts}
    )
    match_counts = +match_counts  # drop zero entries
    m = sum(match_counts.values())
    if m == 0:
        return 0.0
    prec = m / len(cand)
    rec = m / len(ref)
    f_mean = 10.0 * prec * rec / (rec + 9.0 * prec)
    chunks = _min_chunks(cand, ref, match_counts)
    penalty = 0.5 * (chunks / m) ** 3
    return f_mean * (1.0 - penalty)


def meteor_lite(pairs: list[EvalPair]) -> float:
    """Exact-match METEOR: harmonic mean weighted 9:1 toward recall, with a
    fragmentation penalty 0.5 * (chunks / matches)^3. Best reference wins,
    mean over the corpus."""
    if not pairs:
        return 0.0
    total = 0.0
    for pair in pairs:
        total += max(_meteor_single(pair.candidate, r) for r in pair.references)
    return total / len(pairs)


# ---------------------------------------------------------------------------
# CIDEr and SPIDEr


def _cosine(u: dict, v: dict) -> float:
    nu = math.sqrt(sum(x * x for x in u.values()))
    nv = math.sqrt(sum(x * x for x in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    dot = sum(x * v[g] for g, x in u.items() if g in v)
    return dot / (nu * nv)


def cider(pairs: list[EvalPair], max_n: int = 4) -> float:
    """Consensus scoring: plain tf-idf n-gram cosine, orders 1..4, scaled by 10.

    idf is ln(N / df) with document frequency counted over each pair's
    reference set; single-pair corpora make the idf degenerate (everything
    zero), which callers flag.
    """
    if not pairs:
        return 0.0
    n_docs = len(pairs)
    idf: list[dict] = []
    for n in range(1, max_n + 1):
        df: Counter = Counter()
        for pair in pairs:
            seen = set()
            for r in pair.references:
                seen.update(_ngrams(r, n).keys())
            df.update(seen)
        idf.append({g: math.log(n_docs / c) for g, c in df.items()})
    total = 0.0
    for pair in pairs:
        per_n = 0.0
        for n in range(1, max_n + 1):
            weights = idf[n - 1]
            cand_vec = {
                g: cnt * weights.get(g, 0.0) for g, cnt in _ngrams(pair.candidate, n).items()
            }
            sims = []
            for r in pair.references:
                ref_vec = {g: cnt * weights.get(g, 0.0) for g, cnt in _ngrams(r, n).items()}
                sims.append(_cosine(cand_vec, ref_vec))
            per_n += sum(sims) / len(sims)
        total += 10.0 * per_n / max_n
    return total / n_docs


def spider(cider_score: float, spice_score: float | None = None) -> tuple[float, bool]:
    """(SPICE + CIDEr) / 2; falls back to CIDEr / 2 with a missing flag."""
    if spice_score is None:
        return cider_score / 2.0, True
    return (spice_score + cider_score) / 2.0, False


# ---------------------------------------------------------------------------
# report assembly


@dataclass
class MetricReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    meteor: float
    rouge_l: float
    cider: float
    spice: float | None
    spider: float
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in ("bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        for name in ("cider", "spider"):
            v = getattr(self, name)
            if not 0.0 <= v <= 10.0:
                raise ValueError(f"{name} = {v} outside [0, 10]")

    @property
    def average(self) -> float:
        """Mean of the populated metric columns.

        CIDEr and SPIDEr enter on their native 0-10 scale, which mixes
        scales; reports carry a flag saying so rather than rescaling.
        """
        values = [
            self.bleu1,
            self.bleu2,
            self.bleu3,
            self.bleu4,
            self.meteor,
            self.rouge_l,
            self.cider,
            self.spider,
        ]
        if self.spice is not None:
            values.append(self.spice)
        return sum(values) / len(values)

    def as_row(self) -> list[float | None]:
        return [
            self.bleu1,
            self.bleu2,
            self.bleu3,
            self.bleu4,
            self.meteor,
            self.rouge_l,
            self.cider,
            self.spice,
            self.spider,
        ]

    def to_csv(self) -> str:
        header = ",".join(METRIC_COLUMNS + ("AVG",))
        cells = ["" if v is None else f"{v:.6f}" for v in self.as_row()]
        cells.append(f"{self.average:.6f}")
        return header + "\n" + ",".join(cells) + "\n"

    def render(self) -> str:
        lines = [f"{name:<8} {v:.4f}" if v is not None else f"{name:<8} -"
                 for name, v in zip(METRIC_COLUMNS, self.as_row())]
        lines.append(f"{'AVG':<8} {self.average:.4f}")
        if self.flags:
            lines.append("flags: " + ", ".join(self.flags))
        return "\n".join(lines)


def evaluate_pairs(pairs: list[EvalPair], spice_scorer=None) -> MetricReport:
    """Score a corpus with the full metric suite.

    ``spice_scorer`` is an optional callable pairs -> float in [0, 1];
    with none supplied SPIDEr degrades gracefully and the report says so.
    """
    if not pairs:
        raise ValueError("cannot evaluate an empty corpus")
    flags = ["meteor-lite"]  # exact-match METEOR, no stemming or synonyms
    flags.append("avg-mixes-cider-scale")
    if len({(p.candidate, p.references) for p in pairs}) < 2:
        flags.append("cider-degenerate-idf")
    cider_score = cider(pairs)
    spice_score = spice_scorer(pairs) if spice_scorer is not None else None
    spider_score, missing = spider(cider_score, spice_score)
    if missing:
        flags.append("spice-missing")
    return MetricReport(
        bleu1=bleu(pairs, 1),
        bleu2=bleu(pairs, 2),
        bleu3=bleu(pairs, 3),
        bleu4=bleu(pairs, 4),
        meteor=meteor_lite(pairs),
        rouge_l=rouge_l(pairs),
        cider=cider_score,
        spice=spice_score,
        spider=spider_score,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# corpus statistics


@dataclass(frozen=True)
class CorpusStats:
    median_len: int
    max_len: int
    vocab: int


def corpus_stats(texts_by_tier: dict[int, list[str]]) -> dict[int, CorpusStats]:
    """Per-tier word-count stats: lower median, max, distinct-word count."""
    out: dict[int, CorpusStats] = {}
    for tier, texts in texts_by_tier.items():
        if not texts:
            raise ValueError(f"tier {tier} has no explanations")
        tokenized = [metric_tokenize(t) for t in texts]
        lengths = sorted(len(t) for t in tokenized)
        vocab = set()
        for toks in tokenized:
            vocab.update(toks)
        out[tier] = CorpusStats(
            median_len=lengths[(len(lengths) - 1) // 2],
            max_len=lengths[-1],
            vocab=len(vocab),
        )
    return out
