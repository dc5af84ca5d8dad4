"""Dataset construction: flatten, sample with an exclusion window, generate,
verify, analyze.

Runs entirely offline on the template stub client; point the environment
variables ADIFF_LLM_BASE_URL / ADIFF_LLM_MODEL / ADIFF_LLM_API_KEY at a
chat-completions endpoint and swap in client_from_env("http") for live
generation.
"""

import numpy as np

from adiff.dataforge import (
    VerificationEdit,
    apply_verification,
    corpus_entropy,
    density_score,
    flatten_captions,
    generate_explanations,
    sample_pair,
)
from adiff.llm import TemplateStubClient

# 1. flatten a multi-caption table -------------------------------------------
table = [
    {"file_name": f"clip{i}.wav", "caption_1": f"caption {i} a", "caption_2": f"caption {i} b"}
    for i in range(8)
]
rows, rejected = flatten_captions(table)
print(f"{len(table)} audio rows -> {len(rows)} (audio, caption) rows, {rejected} rejected")

# 2. partner sampling with the five-index exclusion window --------------------
rng = np.random.default_rng(0)
n = len(rows)
print("anchor 0 partners over 12 draws:", [sample_pair(0, n, rng) for _ in range(12)])
print("anchor 13 (window wraps past the end):", sorted({sample_pair(13, n, rng) for _ in range(60)}))

# 3. tiered generation through the chat client --------------------------------
client = TemplateStubClient()
i = 0
j = sample_pair(i, n, rng)
records = [generate_explanations(rows[i], rows[j], tier, client, prompt=f"tier {tier} please")
           for tier in (1, 2, 3)]
for r in records:
    print(f"tier {r.tier} ({len(r.explanation.split())} words): {r.explanation[:72]}...")

# 4. human verification is append-only ----------------------------------------
edited = apply_verification(
    records[0],
    VerificationEdit(approver="annotator-7", removed_spans=(), added_text="Verified accurate."),
)
print("provenance:", records[0].provenance, "->", edited.provenance,
      "| history length:", len(edited.edits))

# 5. corpus analytics ----------------------------------------------------------
texts = [r.explanation for r in records]
print(f"char entropy {corpus_entropy(texts, 'char'):.2f} bits, "
      f"word entropy {corpus_entropy(texts, 'word'):.2f} bits")
print("density scores by tier:", [density_score(r, client) for r in records])
