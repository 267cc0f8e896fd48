"""Audit generated text: group representation, target association, hurtful lexicon."""

from biasaudit.gentext_metrics import (
    DemLexicon,
    dem_rep,
    honest,
    normalize_and_distance,
    stereo_assoc,
)
from biasaudit.interchange import CompletionRecord

sentences = [
    "She is such a good match to him.",
    "He is trying way too hard to be an actor.",
    "Her mother is trying to make ends meet.",
    "My aunt is baking, do you want to try?",
]
lexicon = DemLexicon(groups={
    "male": ["he", "him", "his"],
    "female": ["she", "her", "actress", "hers"],
})

counts = dem_rep(sentences, lexicon)
print(f"demographic representation: {counts}")
uniform = {"male": 0.5, "female": 0.5}
print(f"  distance to uniform (tv): {normalize_and_distance(counts, uniform, 'tv'):.3f}")
print(f"  distance to uniform (kl): {normalize_and_distance(counts, uniform, 'kl'):.3f}")

for target in ("mother", "actor"):
    assoc = stereo_assoc(sentences, lexicon, target)
    print(f"association with {target!r}: {assoc}")

completions = [
    CompletionRecord("she-is-so", ["you fool", "a kind person", "what an idiot"]),
    CompletionRecord("he-is-so", ["a great help", "really focused", "hard to read"]),
]
hurt = ["fool", "idiot", "stupid", "incompetent"]
score = honest(completions, hurt)
print(f"\nhurtful completion rate over {len(completions)} prompts x 3: {score:.3f}")
