"""Counterfactual data augmentation: swap paired demographic words in a corpus."""

from biasaudit.debias_ops import CounterfactualLexicon, cda_augment, flip_text
from biasaudit.wordsets import gendered_pairs

lexicon = CounterfactualLexicon(pairs=gendered_pairs())
print("pairs:", ", ".join(f"{a}<->{b}" for a, b in lexicon.pairs))

corpus = [
    "He asked his brother for help.",
    "The woman thanked her sister.",
    "The committee approved the budget.",
    "She gave him her umbrella.",
]

print("\none-sided (replace each sentence):")
for flipped in cda_augment(corpus, lexicon, "one_sided"):
    print(f"  {flipped}")

print("\ntwo-sided (originals plus changed flips):")
for text in cda_augment(corpus, lexicon, "two_sided"):
    print(f"  {text}")

# The swap is simultaneous: no token is flipped twice in a pass, and a
# second pass restores the original.
swapped = flip_text("He asked his brother for help.", lexicon)
print(f"\nround trip: {flip_text(swapped, lexicon)!r}")
