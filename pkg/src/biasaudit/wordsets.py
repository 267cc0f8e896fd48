"""Bundled word lists for the gender/math-arts association test."""

from __future__ import annotations

import json
from importlib import resources

__all__ = ["math_arts_gender_words", "gendered_pairs"]


def math_arts_gender_words() -> dict[str, list[str]]:
    """Word lists keyed by 'math', 'arts', 'male_terms', 'female_terms'."""
    payload = resources.files("biasaudit").joinpath("data/math_arts_gender_words.json").read_text("utf-8")
    return json.loads(payload)


def gendered_pairs() -> list[tuple[str, str]]:
    """Male/female term pairs aligned position by position."""
    words = math_arts_gender_words()
    return list(zip(words["male_terms"], words["female_terms"]))
