"""Embedding-space bias metrics: association scores, effect size, permutation test.

Works on word embeddings and, fed sentence embeddings, on sentence-level
associations with identical math.  Association is measured by cosine
similarity; the effect size divides the group-mean difference by the
population standard deviation over the pooled demographic embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .interchange import EmbeddingRecord
from .numkit import as_vector

__all__ = [
    "DegenerateStatisticError",
    "WeatInputs",
    "WeatResult",
    "PermutationResult",
    "group_embeddings",
    "association_score",
    "weat_effect_size",
    "weat_permutation_pvalue",
    "weat",
    "EXACT_PARTITION_LIMIT",
]

# exhaustive enumeration is used whenever C(2n, n) stays at or below this
EXACT_PARTITION_LIMIT = 20_000

DEFAULT_GROUP_LABELS = ("A1", "A2", "W1", "W2")


class DegenerateStatisticError(ValueError):
    """All association scores coincide, so the effect size is undefined."""


def _stack(vectors, name: str) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        rows = vectors.astype(np.float64)
    else:
        rows = [as_vector(v, name) for v in vectors]
        if not rows:
            raise ValueError(f"{name} must be nonempty")
        if len({r.size for r in rows}) != 1:
            raise ValueError(f"{name} vectors must share one dimension")
        rows = np.vstack(rows)
    if rows.shape[0] == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(rows)):
        raise ValueError(f"{name} contains non-finite entries")
    return rows


def _unit_rows(rows: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise ValueError(f"{name} contains a zero-norm vector")
    return rows / norms[:, None]


@dataclass
class WeatInputs:
    """The four embedding groups: two demographic (a1, a2), two neutral (w1, w2)."""

    a1: np.ndarray
    a2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        self.a1 = _stack(self.a1, "a1")
        self.a2 = _stack(self.a2, "a2")
        self.w1 = _stack(self.w1, "w1")
        self.w2 = _stack(self.w2, "w2")
        dims = {m.shape[1] for m in (self.a1, self.a2, self.w1, self.w2)}
        if len(dims) != 1:
            raise ValueError(f"all groups must share one embedding dimension, got {sorted(dims)}")
        for name, rows in (("a1", self.a1), ("a2", self.a2), ("w1", self.w1), ("w2", self.w2)):
            _unit_rows(rows, name)


def group_embeddings(
    records: Iterable[EmbeddingRecord],
    labels: Sequence[str] = DEFAULT_GROUP_LABELS,
) -> WeatInputs:
    """Assemble WeatInputs from embedding records by their group labels."""
    if len(labels) != 4:
        raise ValueError("labels must name exactly four groups (a1, a2, w1, w2)")
    buckets: dict[str, list] = {label: [] for label in labels}
    for record in records:
        if record.group in buckets:
            buckets[record.group].append(record.vector)
    for label in labels:
        if not buckets[label]:
            raise ValueError(f"no embedding records with group {label!r}")
    return WeatInputs(*(buckets[label] for label in labels))


def _association_scores(a_rows: np.ndarray, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    au = _unit_rows(a_rows, "a")
    w1u = _unit_rows(w1, "w1")
    w2u = _unit_rows(w2, "w2")
    return (au @ w1u.T).mean(axis=1) - (au @ w2u.T).mean(axis=1)


def association_score(a, w1, w2) -> float:
    """Mean cosine of `a` to the w1 set minus mean cosine to the w2 set."""
    av = as_vector(a, "a")
    w1m = _stack(w1, "w1")
    w2m = _stack(w2, "w2")
    if not (av.size == w1m.shape[1] == w2m.shape[1]):
        raise ValueError("dimension mismatch between a, w1 and w2")
    return float(_association_scores(av[None, :], w1m, w2m)[0])


def weat_effect_size(inputs: WeatInputs) -> float:
    """Group-mean association difference over the pooled population std."""
    pooled = np.vstack([inputs.a1, inputs.a2])
    scores = _association_scores(pooled, inputs.w1, inputs.w2)
    n1 = inputs.a1.shape[0]
    std = float(np.std(scores))  # population convention (divide by n)
    if std == 0.0:
        raise DegenerateStatisticError("all association scores are equal; effect size undefined")
    return float((scores[:n1].mean() - scores[n1:].mean()) / std)


_MASK64 = (1 << 64) - 1


class _SplitMix64:
    """SplitMix64: tiny published PRNG, byte-for-byte portable across platforms."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        # rejection sampling keeps the draw unbiased
        limit = _MASK64 + 1 - ((_MASK64 + 1) % bound)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % bound

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


class PermutationResult(NamedTuple):
    p_value: float
    exact: bool
    n_used: int


def weat_permutation_pvalue(
    inputs: WeatInputs,
    n_perm: int = 10_000,
    seed: int = 0,
    method: str = "auto",
) -> PermutationResult:
    """One-sided permutation p-value of the group-mean association difference.

    Re-partitions the pooled demographic embeddings into equal halves.  When
    the number of balanced partitions is at most ``EXACT_PARTITION_LIMIT``
    (and ``method`` is not ``"monte_carlo"``) every partition is enumerated
    and the p-value is exact; otherwise ``n_perm`` seeded random partitions
    are drawn and the add-one smoothed estimate is returned.
    """
    if method not in ("auto", "exact", "monte_carlo"):
        raise ValueError(f"unknown method {method!r}")
    n1 = inputs.a1.shape[0]
    n2 = inputs.a2.shape[0]
    if n1 != n2:
        raise ValueError(f"balanced permutation test requires |A1| == |A2|, got {n1} vs {n2}")
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    pooled = np.vstack([inputs.a1, inputs.a2])
    scores = _association_scores(pooled, inputs.w1, inputs.w2)
    total_sum = float(scores.sum())
    size = scores.size

    def statistic(selected) -> float:
        sel_sum = float(scores[list(selected)].sum())
        return (2.0 * sel_sum - total_sum) / n1

    t_obs = statistic(range(n1))
    n_partitions = comb(size, n1)
    use_exact = method == "exact" or (method == "auto" and n_partitions <= EXACT_PARTITION_LIMIT)
    if use_exact:
        hits = sum(1 for idx in combinations(range(size), n1) if statistic(idx) >= t_obs)
        return PermutationResult(hits / n_partitions, True, n_partitions)
    rng = _SplitMix64(seed)
    indices = list(range(size))
    hits = 0
    for _ in range(n_perm):
        rng.shuffle(indices)
        if statistic(indices[:n1]) >= t_obs:
            hits += 1
    return PermutationResult((1 + hits) / (1 + n_perm), False, n_perm)


@dataclass
class WeatResult:
    """Effect size plus, when requested, the permutation significance."""

    effect_size: float
    p_value: float | None = None
    n_permutations_used: int | None = None
    exact: bool | None = None


def weat(
    inputs: WeatInputs,
    n_perm: int | None = None,
    seed: int = 0,
    method: str = "auto",
) -> WeatResult:
    """Effect size, optionally with the permutation p-value when n_perm is given."""
    effect = weat_effect_size(inputs)
    if n_perm is None:
        return WeatResult(effect_size=effect)
    p_value, exact, n_used = weat_permutation_pvalue(inputs, n_perm=n_perm, seed=seed, method=method)
    return WeatResult(effect_size=effect, p_value=p_value, n_permutations_used=n_used, exact=exact)
