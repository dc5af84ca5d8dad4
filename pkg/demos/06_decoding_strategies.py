"""Greedy vs combined top-k / top-p decoding on a fixed step distribution.

The sampling filter keeps the top k tokens, then the smallest
probability-mass prefix reaching p, renormalizes, and samples; end-of-text
survives the nucleus cut whenever it makes the top k, so generation can
always stop once the model wants to.
"""

import numpy as np

from adiff.decoding import step_sample, topk_topp_support

probs = np.array([0.42, 0.28, 0.14, 0.09, 0.05, 0.02])
print("step distribution:", probs)

for k, p in ((6, 1.0), (3, 0.8), (3, 0.5), (1, 0.8)):
    support = topk_topp_support(probs, k, p)
    mass = probs[support] / probs[support].sum()
    pretty = {int(t): f"{m:.2f}" for t, m in zip(support, mass)}
    print(f"k={k} p={p}: support -> renormalized {pretty}")

# sampling frequencies track the renormalized support distribution
rng = np.random.default_rng(0)
k, p = 3, 0.8
support = topk_topp_support(probs, k, p)
target = probs[support] / probs[support].sum()
counts = np.zeros(probs.size)
draws = 50_000
for _ in range(draws):
    counts[step_sample(probs, k, p, rng)] += 1
print("empirical vs target over the support:")
for t, q in zip(support, target):
    print(f"  token {int(t)}: {counts[t] / draws:.3f} vs {q:.3f}")

# end-of-text retention: tiny eot mass inside the top-k survives the nucleus
probs_eot = np.array([0.7, 0.2, 0.07, 0.03])
without = topk_topp_support(probs_eot, 3, 0.6)
with_eot = topk_topp_support(probs_eot, 3, 0.6, keep_id=2)
print("support without retention:", without.tolist(), "| with eot=2 retained:", with_eot.tolist())
