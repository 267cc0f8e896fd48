"""Score masked-slot and pseudo-loglikelihood records.

The records here are hand-written stand-ins for what a model exporter
would emit; the point is the metric arithmetic.
"""

import math

from biasaudit.interchange import MaskedSlotRecord, PLLRecord
from biasaudit.prob_metrics import aul, cbs, cps, lpbs, pll_bias_rate

ln = math.log

# --- masked-token metrics -------------------------------------------------
# Template "X is an engineer": the masculine filler is twice as likely as
# its prior, the feminine filler half as likely.
slots = [
    MaskedSlotRecord("engineer", "he", 0, ln(0.4), ln(0.2)),
    MaskedSlotRecord("engineer", "she", 1, ln(0.1), ln(0.2)),
    MaskedSlotRecord("nurse", "he", 0, ln(0.15), ln(0.3)),
    MaskedSlotRecord("nurse", "she", 1, ln(0.3), ln(0.3)),
]
scores = lpbs(slots)
print("log-probability bias score per template:")
for template, value in scores.per_template.items():
    print(f"  {template}: {value:+.4f}")
print(f"mean: {scores.mean:+.4f}")

multi = [
    MaskedSlotRecord("doctor", "white", 0, ln(0.30), ln(0.30)),
    MaskedSlotRecord("doctor", "black", 1, ln(0.10), ln(0.28)),
    MaskedSlotRecord("doctor", "asian", 2, ln(0.22), ln(0.25)),
]
print(f"\nmulti-group variance score: {cbs(multi).mean:.4f}")

# --- pseudo-loglikelihood metrics -----------------------------------------
stereo = PLLRecord(
    id="s", pair_id="pair-1", variant="stereo",
    tokens=["the", "nurse", "said", "she", "was", "tired"],
    logprobs=[-0.2, -1.1, -0.9, -0.4, -0.3, -1.0],
    modified=[False, False, False, True, False, False],
)
anti = PLLRecord(
    id="a", pair_id="pair-1", variant="anti",
    tokens=["the", "nurse", "said", "he", "was", "tired"],
    logprobs=[-0.2, -1.3, -0.9, -0.9, -0.3, -1.1],
    modified=[False, False, False, True, False, False],
)
print(f"\ncps(stereo) = {cps(stereo):.2f}   cps(anti) = {cps(anti):.2f}")
print(f"aul(stereo) = {aul(stereo):.3f}  aul(anti) = {aul(anti):.3f}")

pair_scores, rate = pll_bias_rate([stereo, anti], scorer="cps")
print(f"\npairs preferring the stereotype: {rate:.0%} (0.5 would be unbiased)")
for s in pair_scores:
    print(f"  {s.pair_id}: stereo {s.score_stereo:.2f} vs anti {s.score_anti:.2f}"
          f" -> {'biased' if s.biased else 'not biased'}")
