"""Auditing explanations against the frozen tagger's event timelines.

Because the audio encoder never trains after its tag pretraining, its
per-frame class probabilities stay meaningful for any trained system: an
explanation can be cross-checked against each audio's top events. The
report is advisory (token-level exact matching), flagging prominent events
the text missed and named events the audio lacks.
"""

import numpy as np

from adiff.audio import mel_spectrogram
from adiff.dataforge import DifferenceRecord, hallucination_report
from adiff.synth import TOY_MEL, make_tagged_clips, synth_clip
from adiff.tagger import AudioEncoder, EncoderConfig, tag_events, train_tagger

classes = ("beep", "tone", "noise", "chirp", "hum", "click", "whistle", "hiss")
rng = np.random.default_rng(9)
encoder = AudioEncoder(EncoderConfig(mels=TOY_MEL.mels, hidden=32, classes=classes), rng)
mels, tags, _ = make_tagged_clips(160, classes, rng, TOY_MEL)
train_tagger(encoder, mels, tags, epochs=8, rng=np.random.default_rng(10))

clip1 = synth_clip("tone", 0.8, TOY_MEL.sample_rate, np.random.default_rng(21))
clip2 = synth_clip("noise", 0.8, TOY_MEL.sample_rate, np.random.default_rng(22))
tl1 = tag_events(mel_spectrogram(clip1, TOY_MEL), encoder)
tl2 = tag_events(mel_spectrogram(clip2, TOY_MEL), encoder)

top1 = [name for name, _, _ in tl1.top_events(3)]
top2 = [name for name, _, _ in tl2.top_events(3)]

# an explanation covering every prominent event except audio 2's noise
mentioned = sorted((set(top1) | set(top2)) - {"noise"})
record = DifferenceRecord(
    "one.wav", "two.wav", 1, "compare",
    "the clips contain " + " and ".join(mentioned),
)
report = hallucination_report(record, tl1, tl2, top_n=3)
print(report.render())
print()

# a second explanation inventing an event neither audio contains
invented = sorted(set(classes) - set(top1) - set(top2))[0]
record2 = DifferenceRecord(
    "one.wav", "two.wav", 1, "compare",
    "the clips contain " + " and ".join(sorted(set(top1) | set(top2)))
    + f" plus a loud {invented}",
)
print(hallucination_report(record2, tl1, tl2, top_n=3).render())
