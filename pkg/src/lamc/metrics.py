"""Partition-agreement metrics: NMI, ARI, and the contingency machinery.

NMI is normalized by the geometric mean of the two label entropies; ARI is
the pair-counting Rand index adjusted for chance.  Both are invariant to
cluster-id relabeling and to joint permutation of the items.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError

__all__ = ["ContingencyTable", "nmi", "ari", "cocluster_nmi"]


class ContingencyTable:
    """Joint counts between two labelings of the same items."""

    def __init__(self, pred, truth):
        pred = np.asarray(pred).ravel()
        truth = np.asarray(truth).ravel()
        if pred.shape != truth.shape:
            raise ConfigError(
                f"label lengths differ: {pred.shape[0]} vs {truth.shape[0]}"
            )
        if pred.size == 0:
            raise ConfigError("labels must be non-empty")
        _, pred_idx = np.unique(pred, return_inverse=True)
        _, truth_idx = np.unique(truth, return_inverse=True)
        n_pred = int(pred_idx.max()) + 1
        n_truth = int(truth_idx.max()) + 1
        counts = np.zeros((n_pred, n_truth), dtype=np.int64)
        np.add.at(counts, (pred_idx, truth_idx), 1)
        self.counts = counts
        self.pred_marginals = counts.sum(axis=1)
        self.truth_marginals = counts.sum(axis=0)
        self.n_items = int(counts.sum())


def _entropy(marginals, n):
    p = marginals[marginals > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth):
    """Normalized mutual information in [0, 1].

    I(pred; truth) / sqrt(H(pred) H(truth)).  Two degenerate cases are
    pinned: 1.0 when both labelings are single-cluster (identical trivial
    partitions), 0.0 when exactly one entropy is zero.
    """
    table = ContingencyTable(pred, truth)
    n = table.n_items
    h_pred = _entropy(table.pred_marginals, n)
    h_truth = _entropy(table.truth_marginals, n)
    if h_pred == 0.0 and h_truth == 0.0:
        return 1.0
    if h_pred == 0.0 or h_truth == 0.0:
        return 0.0
    counts = table.counts
    nz = counts > 0
    joint = counts[nz] / n
    outer = np.outer(table.pred_marginals, table.truth_marginals)[nz] / (n * n)
    mutual = float((joint * np.log(joint / outer)).sum())
    value = mutual / np.sqrt(h_pred * h_truth)
    return float(min(1.0, max(0.0, value)))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari(pred, truth):
    """Adjusted Rand index in [-1, 1].

    (sum_ij C(n_ij,2) - E) / (max - E) with E the chance expectation; when
    the denominator vanishes the partitions are identical and the index is
    1.0 by convention.
    """
    table = ContingencyTable(pred, truth)
    if table.n_items < 2:
        raise ConfigError("ari needs at least 2 items")
    index = float(_comb2(table.counts).sum())
    sum_pred = float(_comb2(table.pred_marginals).sum())
    sum_truth = float(_comb2(table.truth_marginals).sum())
    total_pairs = float(_comb2(np.array([table.n_items])).sum())
    expected = sum_pred * sum_truth / total_pairs
    maximum = 0.5 * (sum_pred + sum_truth)
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)


def cocluster_nmi(pred, truth):
    """Row and column NMI between two label assignments.

    Accepts :class:`~lamc.merge.LabelAssignment`-like objects (anything
    with ``row_labels``/``col_labels``) or (row_labels, col_labels) pairs.
    """
    pred_rows, pred_cols = _label_pair(pred)
    truth_rows, truth_cols = _label_pair(truth)
    if len(pred_rows) != len(truth_rows) or len(pred_cols) != len(truth_cols):
        raise ConfigError("label assignment dimensions differ")
    return nmi(pred_rows, truth_rows), nmi(pred_cols, truth_cols)


def _label_pair(assignment):
    if hasattr(assignment, "row_labels"):
        return np.asarray(assignment.row_labels), np.asarray(assignment.col_labels)
    rows, cols = assignment
    return np.asarray(rows), np.asarray(cols)
