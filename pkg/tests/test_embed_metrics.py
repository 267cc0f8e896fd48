from itertools import combinations

import numpy as np
import pytest

from biasaudit.embed_metrics import (
    DegenerateStatisticError,
    WeatInputs,
    association_score,
    group_embeddings,
    weat,
    weat_effect_size,
    weat_permutation_pvalue,
)
from biasaudit.interchange import EmbeddingRecord


def oracle_pvalue(a1, a2, w1, w2):
    """Brute-force enumeration of every balanced re-partition."""

    def cos(u, v):
        return np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))

    def assoc(a):
        return np.mean([cos(a, w) for w in w1]) - np.mean([cos(a, w) for w in w2])

    pooled = list(a1) + list(a2)
    scores = [assoc(a) for a in pooled]
    n = len(a1)

    def stat(selected):
        rest = [i for i in range(len(pooled)) if i not in selected]
        return np.mean([scores[i] for i in selected]) - np.mean([scores[i] for i in rest])

    t_obs = stat(tuple(range(n)))
    stats = [stat(sel) for sel in combinations(range(len(pooled)), n)]
    return sum(1 for t in stats if t >= t_obs) / len(stats)


FIXTURE_2D = dict(a1=[[1.0, 0.0]], a2=[[0.0, 1.0]], w1=[[1.0, 0.0]], w2=[[0.0, 1.0]])


class TestAssociationScore:
    def test_toward_w1(self):
        assert association_score([1, 0], [[1, 0]], [[0, 1]]) == pytest.approx(1.0, abs=1e-12)

    def test_same_sets_cancel(self):
        w = [[1, 0], [0.5, 0.5]]
        assert association_score([0.3, 0.7], w, w) == 0.0

    def test_toward_w2(self):
        assert association_score([0, 1], [[1, 0]], [[0, 1]]) == pytest.approx(-1.0, abs=1e-12)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            association_score([0, 0], [[1, 0]], [[0, 1]])


class TestEffectSize:
    def test_two_dimensional_fixture(self):
        assert weat_effect_size(WeatInputs(**FIXTURE_2D)) == pytest.approx(2.0, abs=1e-12)

    def test_identical_groups_give_zero(self):
        both = [[1.0, 0.0], [0.0, 1.0]]
        inputs = WeatInputs(a1=both, a2=both, w1=[[1.0, 0.0]], w2=[[0.0, 1.0]])
        assert weat_effect_size(inputs) == pytest.approx(0.0, abs=1e-12)

    def test_antisymmetry(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            a1 = rng.standard_normal((3, 4))
            a2 = rng.standard_normal((3, 4))
            w1 = rng.standard_normal((2, 4))
            w2 = rng.standard_normal((2, 4))
            base = weat_effect_size(WeatInputs(a1=a1, a2=a2, w1=w1, w2=w2))
            assert weat_effect_size(WeatInputs(a1=a2, a2=a1, w1=w1, w2=w2)) == pytest.approx(
                -base, rel=1e-12
            )
            assert weat_effect_size(WeatInputs(a1=a1, a2=a2, w1=w2, w2=w1)) == pytest.approx(
                -base, rel=1e-12
            )

    def test_degenerate_scores(self):
        inputs = WeatInputs(a1=[[1.0, 0.0]], a2=[[1.0, 0.0]], w1=[[1.0, 0.0]], w2=[[0.0, 1.0]])
        with pytest.raises(DegenerateStatisticError):
            weat_effect_size(inputs)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            WeatInputs(a1=[[1, 0]], a2=[[0, 1]], w1=[[1, 0, 0]], w2=[[0, 1]])


class TestPermutationPvalue:
    def test_two_dimensional_fixture(self):
        p, exact, n_used = weat_permutation_pvalue(WeatInputs(**FIXTURE_2D), n_perm=100, seed=0)
        assert p == 0.5
        assert exact is True
        assert n_used == 2

    def test_all_ties_give_one(self):
        inputs = WeatInputs(a1=[[1.0, 0.0]], a2=[[1.0, 0.0]], w1=[[1.0, 0.0]], w2=[[0.0, 1.0]])
        p, exact, _ = weat_permutation_pvalue(inputs, n_perm=100, seed=0)
        assert p == 1.0
        assert exact is True

    def test_unbalanced_rejected(self):
        inputs = WeatInputs(
            a1=[[1.0, 0.0], [0.5, 0.5]], a2=[[0.0, 1.0]], w1=[[1.0, 0.0]], w2=[[0.0, 1.0]]
        )
        with pytest.raises(ValueError, match="balanced"):
            weat_permutation_pvalue(inputs, n_perm=10, seed=0)

    def test_exact_matches_bruteforce_up_to_size_four(self):
        rng = np.random.default_rng(29)
        for size in (1, 2, 3, 4):
            for _ in range(5):
                a1 = rng.standard_normal((size, 5))
                a2 = rng.standard_normal((size, 5))
                w1 = rng.standard_normal((3, 5))
                w2 = rng.standard_normal((3, 5))
                p, exact, _ = weat_permutation_pvalue(
                    WeatInputs(a1=a1, a2=a2, w1=w1, w2=w2), n_perm=10, seed=0
                )
                assert exact is True
                assert p == oracle_pvalue(a1, a2, w1, w2)

    def test_monte_carlo_close_to_exact(self):
        rng = np.random.default_rng(31)
        a1 = rng.standard_normal((3, 4))
        a2 = rng.standard_normal((3, 4))
        w1 = rng.standard_normal((2, 4))
        w2 = rng.standard_normal((2, 4))
        inputs = WeatInputs(a1=a1, a2=a2, w1=w1, w2=w2)
        p_exact, _, _ = weat_permutation_pvalue(inputs, n_perm=10, seed=0)
        p_mc, exact, n_used = weat_permutation_pvalue(
            inputs, n_perm=10_000, seed=123, method="monte_carlo"
        )
        assert exact is False
        assert n_used == 10_000
        assert abs(p_mc - p_exact) <= 0.05

    def test_monte_carlo_reproducible(self):
        rng = np.random.default_rng(37)
        inputs = WeatInputs(
            a1=rng.standard_normal((4, 4)),
            a2=rng.standard_normal((4, 4)),
            w1=rng.standard_normal((2, 4)),
            w2=rng.standard_normal((2, 4)),
        )
        first = weat_permutation_pvalue(inputs, n_perm=500, seed=42, method="monte_carlo")
        second = weat_permutation_pvalue(inputs, n_perm=500, seed=42, method="monte_carlo")
        assert first == second

    def test_scale_invariance(self):
        rng = np.random.default_rng(41)
        a1 = rng.standard_normal((2, 4))
        a2 = rng.standard_normal((2, 4))
        w1 = rng.standard_normal((3, 4))
        w2 = rng.standard_normal((3, 4))
        base = WeatInputs(a1=a1, a2=a2, w1=w1, w2=w2)
        scaled = WeatInputs(a1=3.5 * a1, a2=3.5 * a2, w1=3.5 * w1, w2=3.5 * w2)
        assert weat_effect_size(scaled) == pytest.approx(weat_effect_size(base), rel=1e-12)
        assert weat_permutation_pvalue(scaled, n_perm=50, seed=7) == weat_permutation_pvalue(
            base, n_perm=50, seed=7
        )


class TestGrouping:
    def test_group_embeddings(self):
        records = [
            EmbeddingRecord(id="1", group="A1", text="a", vector=[1.0, 0.0]),
            EmbeddingRecord(id="2", group="A2", text="b", vector=[0.0, 1.0]),
            EmbeddingRecord(id="3", group="W1", text="c", vector=[1.0, 0.0]),
            EmbeddingRecord(id="4", group="W2", text="d", vector=[0.0, 1.0]),
            EmbeddingRecord(id="5", group="other", text="e", vector=[1.0, 1.0]),
        ]
        inputs = group_embeddings(records)
        assert weat_effect_size(inputs) == pytest.approx(2.0, abs=1e-12)

    def test_missing_group(self):
        records = [EmbeddingRecord(id="1", group="A1", text="a", vector=[1.0, 0.0])]
        with pytest.raises(ValueError, match="A2"):
            group_embeddings(records)


class TestWeatFull:
    def test_result_fields(self):
        result = weat(WeatInputs(**FIXTURE_2D), n_perm=50, seed=0)
        assert result.effect_size == pytest.approx(2.0, abs=1e-12)
        assert result.p_value == 0.5
        assert result.exact is True
        assert result.n_permutations_used == 2

    def test_without_pvalue(self):
        result = weat(WeatInputs(**FIXTURE_2D))
        assert result.p_value is None and result.exact is None
