"""Input- and representation-level debiasers.

Counterfactual augmentation swaps paired demographic words in text; the
bias subspace is fitted from counterfactual pair embeddings and removed by
orthogonal projection; the unfreeze selector builds parameter masks by
substring match.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .numkit import as_matrix, as_vector, top_eigenvectors

__all__ = [
    "DegenerateSubspaceError",
    "CounterfactualLexicon",
    "BiasSubspace",
    "cda_augment",
    "flip_text",
    "fit_bias_subspace",
    "project_out",
    "select_unfrozen",
]

CDA_MODES = ("one_sided", "two_sided")

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)  # same boundary rule as the text tokenizer


class DegenerateSubspaceError(ValueError):
    """All counterfactual pairs coincide, so no bias direction exists."""


@dataclass
class CounterfactualLexicon:
    """Counterfactual word pairs; lowercase, no word may appear in two pairs."""

    pairs: list[tuple[str, str]]
    _mapping: dict[str, str] = field(init=False, repr=False)

    def __post_init__(self):
        normalized: list[tuple[str, str]] = []
        mapping: dict[str, str] = {}
        for a, b in self.pairs:
            a, b = a.lower(), b.lower()
            if a == b:
                raise ValueError(f"pair members must differ, got {a!r} twice")
            for word in (a, b):
                if word in mapping:
                    raise ValueError(f"word {word!r} appears in more than one pair")
            mapping[a] = b
            mapping[b] = a
            normalized.append((a, b))
        self.pairs = normalized
        self._mapping = mapping

    def counterpart(self, word: str) -> str | None:
        return self._mapping.get(word)


def flip_text(text: str, lexicon: CounterfactualLexicon) -> str:
    """Swap every paired word for its counterpart in one simultaneous pass.

    Matching is case-insensitive on word boundaries; a leading capital is
    preserved (ALL-CAPS tokens come back with a leading capital only).
    """

    def replace(match: re.Match) -> str:
        token = match.group(0)
        counterpart = lexicon.counterpart(token.lower())
        if counterpart is None:
            return token
        if token[0].isupper():
            return counterpart[0].upper() + counterpart[1:]
        return counterpart

    return _WORD_RE.sub(replace, text)


def cda_augment(
    texts: Iterable[str],
    lexicon: CounterfactualLexicon,
    mode: str = "two_sided",
) -> list[str]:
    """Counterfactually augment texts by flipping paired demographic words.

    ``one_sided`` replaces each text with its flipped version; ``two_sided``
    keeps every original and appends each flipped version that differs,
    originals first and flips in input order.
    """
    if mode not in CDA_MODES:
        raise ValueError(f"mode must be one of {CDA_MODES}, got {mode!r}")
    texts = list(texts)
    flipped = [flip_text(t, lexicon) for t in texts]
    if mode == "one_sided":
        return flipped
    return texts + [f for t, f in zip(texts, flipped) if f != t]


@dataclass
class BiasSubspace:
    """Orthonormal basis of the identified bias directions (rows of `basis`)."""

    basis: np.ndarray
    dim: int
    explained: list[float]

    def __post_init__(self):
        self.basis = as_matrix(self.basis, "basis")
        if self.basis.shape[1] != self.dim:
            raise ValueError(
                f"basis vectors have dimension {self.basis.shape[1]}, expected {self.dim}"
            )
        if len(self.explained) != self.basis.shape[0]:
            raise ValueError("explained must have one eigenvalue per basis vector")
        gram = self.basis @ self.basis.T
        if np.any(np.abs(np.diag(gram) - 1.0) > 1e-12):
            raise ValueError("basis vectors must be unit norm")
        off = gram - np.diag(np.diag(gram))
        if np.any(np.abs(off) > 1e-10):
            raise ValueError("basis vectors must be pairwise orthogonal")

    def to_json_obj(self) -> dict:
        return {
            "dim": self.dim,
            "basis": [list(row) for row in self.basis],
            "explained": list(self.explained),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BiasSubspace":
        return cls(
            basis=np.asarray(obj["basis"], dtype=np.float64),
            dim=int(obj["dim"]),
            explained=[float(x) for x in obj["explained"]],
        )


def fit_bias_subspace(
    pair_embeddings: Sequence[tuple],
    n_components: int,
) -> BiasSubspace:
    """Principal directions of counterfactual-pair deviations from pair means.

    Each pair (x, y) contributes x - m and y - m with m = (x + y)/2; the
    basis is the top eigenvectors of the uncentered covariance of these
    deviations, which is symmetric in the order of the pair members.
    """
    if not pair_embeddings:
        raise ValueError("need at least one embedding pair")
    deviations = []
    dim = None
    for x, y in pair_embeddings:
        xv = as_vector(x, "pair embedding")
        yv = as_vector(y, "pair embedding")
        if xv.size != yv.size:
            raise ValueError("pair embeddings must share one dimension")
        if dim is None:
            dim = xv.size
        elif xv.size != dim:
            raise ValueError("all pairs must share one embedding dimension")
        mean = (xv + yv) / 2.0
        deviations.append(xv - mean)
        deviations.append(yv - mean)
    if not 1 <= n_components <= dim:
        raise ValueError(f"n_components must be in [1, {dim}], got {n_components}")
    dev = np.vstack(deviations)
    cov = dev.T @ dev / dev.shape[0]
    if not cov.any():
        raise DegenerateSubspaceError("all pairs identical; deviation covariance is zero")
    eigenpairs = top_eigenvectors(cov, n_components)
    basis = np.vstack([vec for _, vec in eigenpairs])
    explained = [val for val, _ in eigenpairs]
    return BiasSubspace(basis=basis, dim=dim, explained=explained)


def project_out(h, subspace: BiasSubspace) -> np.ndarray:
    """Remove the component of h lying in the bias subspace."""
    hv = as_vector(h, "h")
    if hv.size != subspace.dim:
        raise ValueError(f"dimension mismatch: h has {hv.size}, subspace has {subspace.dim}")
    return hv - subspace.basis.T @ (subspace.basis @ hv)


def select_unfrozen(param_names: Sequence[str], substrings: Sequence[str]) -> list[bool]:
    """True where a parameter name contains any of the substrings (case-sensitive)."""
    return [any(s in name for s in substrings) for name in param_names]
