"""The caption metric suite on worked examples.

Each metric is corpus-level; the report mirrors the usual captioning-table
column order and carries an AVG column over every populated metric (CIDEr
stays on its native 0-10 scale, which the flags call out).
"""

from adiff.metrics import bleu, corpus_stats, evaluate_pairs, meteor_lite, pairs_from_texts, rouge_l

candidates = [
    "a dog barks in a quiet park",
    "rain falls on a tin roof",
    "a siren passes from left to right",
]
references = [
    ["a dog is barking in the park", "dog barking outdoors"],
    ["heavy rain hits a tin roof"],
    ["a siren sweeps past the listener", "an emergency siren passes by"],
]

pairs = pairs_from_texts(candidates, references)
report = evaluate_pairs(pairs)
print(report.render())
print()
print(report.to_csv())

# hand-checkable single cases -------------------------------------------------
one = pairs_from_texts(["the cat sat"], [["the cat sat down"]])
print("BLEU1 with brevity penalty exp(1 - 4/3):", f"{bleu(one, 1):.4f}")

swap = pairs_from_texts(["b a"], [["a b"]])
print("METEOR on a swapped bigram (2 chunks, full overlap):", meteor_lite(swap))

lcs = pairs_from_texts(["a b c d"], [["a c b d"]])
print("ROUGE-L with LCS 3 of 4:", rouge_l(lcs))

# corpus statistics -----------------------------------------------------------
stats = corpus_stats({1: candidates, 2: [r for refs in references for r in refs]})
for tier, s in stats.items():
    print(f"tier {tier}: median {s.median_len} words, max {s.max_len}, vocab {s.vocab}")
