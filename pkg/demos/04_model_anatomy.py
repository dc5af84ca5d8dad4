"""Anatomy of the explanation model: prefix assembly and interpretation.

Shows the latent pipeline at reference dimensions: two pooled audio
embeddings expand to 40 latent tokens each, join a separator and the
projected 40-token prompt into a 121-token prefix, pass through the
cross-projection, and condition the decoder. The nearest-vocabulary op
projects latent rows back onto readable tokens.
"""

import numpy as np

from adiff.model import DiffExplainer, ModelConfig, nearest_vocab
from adiff.tagger import AudioEncoder, EncoderConfig

config = ModelConfig(dim=64, decoder_depth=2, proj_depth=2, cross_depth=1,
                     heads=4, vocab_size=300, encoder_dim=32, max_context=256)
print(f"audio prefix {config.audio_prefix_len} + sep 1 + audio {config.audio_prefix_len}"
      f" + text {config.text_prefix_len} = {config.prefix_len} latent tokens")

encoder = AudioEncoder(EncoderConfig(mels=32, hidden=32, classes=("a", "b")),
                       np.random.default_rng(0))
model = DiffExplainer(config, encoder, seed=0)

groups = {}
for name, group in model.groups().items():
    groups.setdefault(group, 0)
    groups[group] += model.params[name].data.size
print("parameters per group:", {g: f"{n:,}" for g, n in sorted(groups.items())})

rng = np.random.default_rng(1)
e1 = rng.standard_normal(32).astype(np.float32)
e2 = rng.standard_normal(32).astype(np.float32)

lat1 = model.project_audio(e1)
lat2 = model.project_audio(e2)
text = model.project_text(model.prepare_prompt_ids([65, 66, 67]))
assembly = model.cross_project(model.assemble_prefix(lat1, lat2, text))
print("block boundaries:", assembly.bounds)
print("pre/post cross shapes:", assembly.pre_cross.shape, assembly.post_cross.shape)

# logits conditioned on the prefix alone, then with two generated tokens
logits = model.next_token_logits(assembly, [])
print("logits over the vocabulary:", logits.shape)
more = model.next_token_logits(assembly, [10, 20])
print("with two generated tokens:", more.shape)

# nearest-vocabulary interpretation of the post-cross prefix rows
table = model.params["psi.vocab"]
row_tokens = [nearest_vocab(assembly.post_cross.data[i], table) for i in range(0, 121, 20)]
print("every 20th prefix row maps to token id:", row_tokens)
print("scale invariance:", nearest_vocab(table.data[7], table) ==
      nearest_vocab(5.0 * table.data[7], table) == 7)
