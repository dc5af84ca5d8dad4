"""Audio in, features and event timelines out.

Generates a few synthetic clips, computes log mel spectrograms, trains the
toy tagger on tag data, and prints each clip's top event classes over time.
"""

import numpy as np

from adiff.audio import mel_spectrogram, save_wav, truncate_random
from adiff.synth import TOY_MEL, make_tagged_clips, synth_clip
from adiff.tagger import AudioEncoder, EncoderConfig, tag_events, train_tagger

rng = np.random.default_rng(0)

# 1. clips and features ------------------------------------------------------
clip = synth_clip("siren", seconds=2.0, sr=TOY_MEL.sample_rate, rng=rng)
print(f"siren clip: {clip.duration:.1f}s at {clip.sample_rate} Hz")

window = truncate_random(clip, 0.8, rng)
spec = mel_spectrogram(window, TOY_MEL)
print(f"mel spectrogram: {spec.frames} frames x {spec.values.shape[1]} bands "
      f"({spec.frame_rate:.0f} frames/s)")

# 2. a tagger learns four classes -------------------------------------------
classes = ("beep", "tone", "noise", "chirp")
encoder = AudioEncoder(EncoderConfig(mels=TOY_MEL.mels, hidden=24, classes=classes), rng)
mels, tags, _ = make_tagged_clips(60, classes, rng, TOY_MEL)
curve = train_tagger(encoder, mels, tags, epochs=6, rng=np.random.default_rng(1))
print(f"tagger BCE per epoch: {['%.3f' % v for v in curve]}")

# 3. timelines: presence probabilities over time ------------------------------
for kind in classes:
    probe = synth_clip(kind, seconds=0.8, sr=TOY_MEL.sample_rate, rng=rng)
    timeline = tag_events(mel_spectrogram(probe, TOY_MEL), encoder)
    top = ", ".join(f"{n} ({p:.2f} @ {f})" for n, p, f in timeline.top_events(3))
    print(f"{kind:>6}: {top}")

# 4. the pooled embedding the explanation model consumes ---------------------
emb = encoder.embed(mels[0])
print("pooled embedding dim:", emb.shape[0], "norm:", float(np.linalg.norm(emb)))
