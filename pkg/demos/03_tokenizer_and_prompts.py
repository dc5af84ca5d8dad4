"""Byte-level BPE and the tiered prompt database."""

import numpy as np

from adiff.prompts import default_prompt_db
from adiff.tokenizer import metric_tokenize, train_bpe

corpus = [
    "the first audio contains short repeating beep tones",
    "the second audio carries harsh broadband noise",
    "a rising frequency chirp against one steady sine tone",
]
vocab = train_bpe(corpus, vocab_size=256 + 2 + 40)
print(f"vocab size {vocab.size}: 256 bytes + 2 specials + {len(vocab.merges)} merges")
print("first merges:", [(a + b).decode() for a, b in vocab.merges[:8]])

ids = vocab.encode(corpus[0])
print(f"{len(corpus[0])} chars -> {len(ids)} tokens -> round trip ok:",
      vocab.decode(ids) == corpus[0])

# byte-level means nothing is out of vocabulary, even unseen text
weird = "entirely UNSEEN text, 100% safe ✓"
print("unseen round trip ok:", vocab.decode(vocab.encode(weird)) == weird)

# the metric-side word tokenizer is a different, simpler animal
print("metric_tokenize('A Dog, barking!') ->", metric_tokenize("A Dog, barking!"))

# prompt database: >= 100 phrasings per tier, sampled during training
db = default_prompt_db()
rng = np.random.default_rng(7)
for tier in (1, 2, 3):
    print(f"tier {tier} ({len(db.list_for(tier))} prompts):", db.sample(tier, rng))
print("position prompt:", db.sample("first", rng))
