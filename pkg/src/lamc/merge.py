"""Hierarchical merging of block-level co-clusters into a global result.

Each block result is lifted to global coordinates as a set of candidate
co-clusters; candidates from all rounds are then fused by greedy
agglomeration on Jaccard-product similarity, and overlapping claims are
resolved by provenance majority into a single consistent label assignment.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .matrix import BlockView

__all__ = [
    "CoCluster",
    "MergeStep",
    "MergeTrace",
    "LabelAssignment",
    "similarity",
    "lift_to_global",
    "hierarchical_merge",
    "consensus_labels",
    "order_coclusters",
]


@dataclass(frozen=True)
class CoCluster:
    """A (global row set, global column set) pair with provenance.

    ``provenance`` records every (round, block_coords) that contributed;
    ``score`` is the mean matrix value over the co-cluster's cells.
    """

    rows: frozenset
    cols: frozenset
    provenance: frozenset
    score: float

    @property
    def n_cells(self):
        return len(self.rows) * len(self.cols)

    def to_dict(self):
        return {
            "rows": sorted(self.rows),
            "cols": sorted(self.cols),
            "score": self.score,
            "provenance_count": len(self.provenance),
        }


@dataclass(frozen=True)
class MergeStep:
    first: int
    second: int
    similarity: float
    merged_id: int


@dataclass(frozen=True)
class MergeTrace:
    iterations: tuple
    stopped_reason: str

    def to_dict(self):
        return {
            "iterations": [
                {
                    "pair": [step.first, step.second],
                    "similarity": step.similarity,
                    "merged_id": step.merged_id,
                }
                for step in self.iterations
            ],
            "stopped_reason": self.stopped_reason,
        }


def _jaccard(a, b):
    if not a and not b:
        return 1.0
    inter = len(a & b)
    if inter == 0:
        return 0.0
    return inter / (len(a) + len(b) - inter)


def similarity(a, b):
    """Jaccard-product similarity: J(rows) * J(cols), in [0, 1].

    Equals 1 exactly when both the row sets and the column sets coincide;
    requiring agreement on both axes matches co-cluster semantics.
    """
    return _jaccard(a.rows, b.rows) * _jaccard(a.cols, b.cols)


def _group_means(values, row_labels, col_labels, k):
    """Mean matrix value per (row-cluster, col-cluster) pair, plus block mean."""
    n_rows, n_cols = values.shape
    row_ind = np.zeros((k, n_rows))
    col_ind = np.zeros((n_cols, k))
    for lab in range(1, k + 1):
        row_ind[lab - 1, row_labels == lab] = 1.0
        col_ind[col_labels == lab, lab - 1] = 1.0
    if sp.issparse(values):
        sums = row_ind @ np.asarray(values @ col_ind)
        total = float(values.sum())
    else:
        sums = row_ind @ values @ col_ind
        total = float(values.sum())
    row_counts = np.array([(row_labels == lab).sum() for lab in range(1, k + 1)])
    col_counts = np.array([(col_labels == lab).sum() for lab in range(1, k + 1)])
    cells = np.outer(row_counts, col_counts).astype(np.float64)
    means = np.divide(sums, cells, out=np.zeros_like(sums), where=cells > 0)
    return means, total / (n_rows * n_cols)


def lift_to_global(
    result, block, round_index, row_threshold, col_threshold, mean_factor=1.5
):
    """Turn one block result into global candidate co-clusters.

    A (row-cluster, col-cluster) label pair becomes a candidate when it has
    at least ``row_threshold`` rows and ``col_threshold`` cols, and its
    submatrix mean exceeds ``mean_factor`` times the block mean (pairs at
    background density would otherwise flood the merge stage).  Indices are
    translated to global ids through the block's spans.
    """
    if not isinstance(block, BlockView):
        raise ConfigError("lift_to_global needs a BlockView")
    values = block.values()
    means, block_mean = _group_means(
        values, result.row_labels, result.col_labels, result.k
    )
    row_span = block.row_span
    col_span = block.col_span
    candidates = []
    for r in range(1, result.k + 1):
        local_rows = np.flatnonzero(result.row_labels == r)
        if len(local_rows) < row_threshold:
            continue
        for c in range(1, result.k + 1):
            local_cols = np.flatnonzero(result.col_labels == c)
            if len(local_cols) < col_threshold:
                continue
            mean = means[r - 1, c - 1]
            if mean <= mean_factor * block_mean:
                continue
            candidates.append(
                CoCluster(
                    rows=frozenset(int(g) for g in row_span[local_rows]),
                    cols=frozenset(int(g) for g in col_span[local_cols]),
                    provenance=frozenset({(round_index, block.block_coords)}),
                    score=float(mean),
                )
            )
    return candidates


def order_coclusters(coclusters):
    """Deterministic output order: by cell count, then smallest row/col id."""
    return sorted(
        coclusters,
        key=lambda cc: (-cc.n_cells, min(cc.rows), min(cc.cols)),
    )


def _merge_pair(a, b):
    cells = a.n_cells + b.n_cells
    score = (a.score * a.n_cells + b.score * b.n_cells) / cells if cells else 0.0
    return CoCluster(
        rows=a.rows | b.rows,
        cols=a.cols | b.cols,
        provenance=a.provenance | b.provenance,
        score=score,
    )


def hierarchical_merge(candidates, threshold=0.5, cap=None):
    """Greedy agglomeration: repeatedly merge the most similar pair.

    Merging stops when no active pair reaches ``threshold`` or after
    ``cap`` merges (default: the candidate count, so the stage finishes
    within a pre-fixed number of iterations).  Ties break toward the
    lowest candidate ids; merged candidates get fresh ids appended after
    the inputs, and the trace records every step.
    """
    if not (0.0 < threshold <= 1.0):
        raise ConfigError("merge threshold must lie in (0, 1]")
    candidates = list(candidates)
    n = len(candidates)
    if cap is None:
        cap = n
    if cap < 1:
        raise ConfigError("iteration cap must be >= 1")
    if n == 0:
        return [], MergeTrace(iterations=(), stopped_reason="threshold-exhausted")

    slots = n + min(cap, n)  # each merge consumes two actives, adds one
    pool = list(candidates) + [None] * (slots - n)
    active = np.zeros(slots, dtype=bool)
    active[:n] = True
    sims = np.full((slots, slots), -1.0)
    for i in range(n):
        for j in range(i + 1, n):
            sims[i, j] = similarity(pool[i], pool[j])

    steps = []
    stopped = None
    next_id = n
    while len(steps) < cap:
        live = np.flatnonzero(active)
        if len(live) < 2:
            stopped = "threshold-exhausted"
            break
        sub = sims[np.ix_(live, live)]
        flat = int(np.argmax(sub))
        best = float(sub.flat[flat])
        if best < threshold:
            stopped = "threshold-exhausted"
            break
        i = int(live[flat // len(live)])
        j = int(live[flat % len(live)])
        merged = _merge_pair(pool[i], pool[j])
        pool[next_id] = merged
        active[i] = active[j] = False
        active[next_id] = True
        for other in np.flatnonzero(active[:next_id]):
            sims[other, next_id] = similarity(pool[other], merged)
        steps.append(
            MergeStep(first=i, second=j, similarity=best, merged_id=next_id)
        )
        next_id += 1
    if stopped is None:
        stopped = "iteration-cap"
    survivors = order_coclusters([pool[i] for i in np.flatnonzero(active)])
    return survivors, MergeTrace(iterations=tuple(steps), stopped_reason=stopped)


@dataclass(frozen=True)
class LabelAssignment:
    """Final labels: every row/column carries exactly one cluster id.

    Ids 1..K-1 correspond to ``survivors`` (indices into the merged list,
    in order); the last id K is the background cluster for rows/columns no
    surviving co-cluster claimed.
    """

    row_labels: np.ndarray
    col_labels: np.ndarray
    n_row_clusters: int
    n_col_clusters: int
    survivors: tuple


def consensus_labels(merged, n_rows, n_cols):
    """Resolve overlapping co-cluster claims into one label per row/column.

    A row goes to the claiming co-cluster with the most provenance entries
    (ties: higher score, then lower cluster id); unclaimed rows/columns go
    to the background cluster.  Co-clusters that win no row or no column
    are dropped and the remaining ones renumbered in order.
    """
    merged = list(merged)
    row_claim = [None] * n_rows
    col_claim = [None] * n_cols
    for idx, cc in enumerate(merged):
        key = (len(cc.provenance), cc.score, -idx)
        for r in cc.rows:
            if row_claim[r] is None or key > row_claim[r][0]:
                row_claim[r] = (key, idx)
        for c in cc.cols:
            if col_claim[c] is None or key > col_claim[c][0]:
                col_claim[c] = (key, idx)

    won_rows = {idx: 0 for idx in range(len(merged))}
    won_cols = {idx: 0 for idx in range(len(merged))}
    for claim in row_claim:
        if claim is not None:
            won_rows[claim[1]] += 1
    for claim in col_claim:
        if claim is not None:
            won_cols[claim[1]] += 1
    survivors = tuple(
        idx for idx in range(len(merged)) if won_rows[idx] > 0 and won_cols[idx] > 0
    )
    label_of = {idx: lab for lab, idx in enumerate(survivors, start=1)}
    background = len(survivors) + 1

    row_labels = np.full(n_rows, background, dtype=np.int64)
    col_labels = np.full(n_cols, background, dtype=np.int64)
    for r, claim in enumerate(row_claim):
        if claim is not None and claim[1] in label_of:
            row_labels[r] = label_of[claim[1]]
    for c, claim in enumerate(col_claim):
        if claim is not None and claim[1] in label_of:
            col_labels[c] = label_of[claim[1]]
    return LabelAssignment(
        row_labels=row_labels,
        col_labels=col_labels,
        n_row_clusters=background,
        n_col_clusters=background,
        survivors=survivors,
    )
