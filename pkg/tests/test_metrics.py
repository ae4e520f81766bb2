import math
from collections import Counter

import numpy as np
import pytest

from lamc.errors import ConfigError
from lamc.metrics import ContingencyTable, ari, cocluster_nmi, nmi


def nmi_oracle(pred, truth):
    """Direct-entropy oracle over joint label counts."""
    n = len(pred)
    joint = Counter(zip(pred, truth))
    p_counts = Counter(pred)
    t_counts = Counter(truth)

    def entropy(counter):
        return -sum((c / n) * math.log(c / n) for c in counter.values())

    h_p, h_t = entropy(p_counts), entropy(t_counts)
    if h_p == 0.0 and h_t == 0.0:
        return 1.0
    if h_p == 0.0 or h_t == 0.0:
        return 0.0
    mutual = 0.0
    for (a, b), c in joint.items():
        mutual += (c / n) * math.log((c * n) / (p_counts[a] * t_counts[b]))
    return mutual / math.sqrt(h_p * h_t)


def ari_oracle(pred, truth):
    """Pair-counting oracle: iterate every item pair explicitly."""
    n = len(pred)
    same_both = same_pred = same_truth = 0
    for i in range(n):
        for j in range(i + 1, n):
            sp = pred[i] == pred[j]
            st = truth[i] == truth[j]
            same_both += sp and st
            same_pred += sp
            same_truth += st
    total = n * (n - 1) / 2
    expected = same_pred * same_truth / total
    maximum = 0.5 * (same_pred + same_truth)
    if maximum == expected:
        return 1.0
    return (same_both - expected) / (maximum - expected)


class TestNmi:
    def test_identical_labelings(self):
        labels = [0, 0, 1, 1, 2]
        assert nmi(labels, labels) == 1.0

    def test_invariant_to_relabeling(self):
        truth = [0, 0, 1, 1, 2, 2]
        renamed = [5, 5, 9, 9, 1, 1]
        assert nmi(renamed, truth) == pytest.approx(1.0, abs=1e-12)

    def test_independent_partitions_zero(self):
        assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_both_single_cluster_is_one(self):
        assert nmi([3, 3, 3], [7, 7, 7]) == 1.0

    def test_one_single_cluster_is_zero(self):
        assert nmi([1, 1, 1], [0, 1, 2]) == 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 4, size=30)
        b = rng.integers(0, 3, size=30)
        assert nmi(a, b) == pytest.approx(nmi(b, a), abs=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            nmi([0, 1], [0, 1, 2])


class TestAri:
    def test_identical_labelings(self):
        assert ari([0, 1, 1, 2], [0, 1, 1, 2]) == 1.0

    def test_hand_value_minus_half(self):
        # contingency all-ones 2x2: index 0, E = 2/3, max = 2
        assert ari([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5, abs=1e-14)

    def test_chance_level_near_zero(self):
        rng = np.random.default_rng(17)
        values = []
        for _ in range(100):
            a = rng.integers(0, 5, size=1000)
            b = rng.integers(0, 5, size=1000)
            values.append(ari(a, b))
        assert abs(float(np.mean(values))) <= 0.02

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        a = rng.integers(0, 4, size=25)
        b = rng.integers(0, 4, size=25)
        assert ari(a, b) == pytest.approx(ari(b, a), abs=1e-14)

    def test_all_singletons_identical(self):
        assert ari([0, 1, 2], [5, 6, 7]) == 1.0

    def test_needs_two_items(self):
        with pytest.raises(ConfigError):
            ari([0], [0])


class TestAgainstOracles:
    def test_random_pairs_match_brute_force(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            n = int(rng.integers(2, 51))
            pred = rng.integers(0, int(rng.integers(1, 6)) + 1, size=n).tolist()
            truth = rng.integers(0, int(rng.integers(1, 6)) + 1, size=n).tolist()
            assert nmi(pred, truth) == pytest.approx(
                nmi_oracle(pred, truth), abs=1e-10
            )
            assert ari(pred, truth) == pytest.approx(
                ari_oracle(pred, truth), abs=1e-10
            )

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(5)
        pred = rng.integers(0, 4, size=40)
        truth = rng.integers(0, 3, size=40)
        perm = rng.permutation(40)
        assert nmi(pred[perm], truth[perm]) == pytest.approx(nmi(pred, truth), abs=1e-13)
        assert ari(pred[perm], truth[perm]) == pytest.approx(ari(pred, truth), abs=1e-13)


class TestCoclusterNmi:
    def test_identical_assignments(self):
        rows = np.array([1, 1, 2, 2])
        cols = np.array([1, 2, 2, 1])
        assert cocluster_nmi((rows, cols), (rows, cols)) == (1.0, 1.0)

    def test_rows_match_cols_independent(self):
        rows = np.array([1, 1, 2, 2])
        pred_cols = np.array([1, 1, 2, 2])
        truth_cols = np.array([1, 2, 1, 2])
        row_nmi, col_nmi = cocluster_nmi((rows, pred_cols), (rows, truth_cols))
        assert row_nmi == 1.0
        assert col_nmi == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            cocluster_nmi(([1, 2], [1]), ([1, 2, 3], [1]))


class TestContingencyTable:
    def test_counts_and_marginals_consistent(self):
        table = ContingencyTable([0, 0, 1, 1, 1], [0, 1, 1, 1, 2])
        assert table.counts.sum() == 5
        assert table.pred_marginals.tolist() == [2, 3]
        assert table.truth_marginals.tolist() == [1, 3, 1]
        assert np.array_equal(table.counts.sum(axis=1), table.pred_marginals)
