"""Spectral atom co-clusterer for a single block.

Normalizes the block as a bipartite graph adjacency, takes the leading
singular triplets of the normalized matrix (which solve the relaxed
normalized-cut problem on the graph Laplacian), stacks the degree-scaled
singular vectors into a joint row/column embedding, and labels embedding
rows with k-means.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, EmptyBlockError, NumericalError, SvdConvergenceError
from .matrix import BlockView

__all__ = [
    "DegreePair",
    "NormalizedBlock",
    "SpectralEmbedding",
    "BlockCoClusterResult",
    "normalize",
    "truncated_svd",
    "build_embedding",
    "kmeans",
    "cocluster_block",
    "embedding_dim",
]

# blocks at or below this size always use the exact dense SVD
_DENSE_SVD_LIMIT = 64


@dataclass(frozen=True)
class DegreePair:
    """Positive row/column sums of the (trimmed) block."""

    row_degrees: np.ndarray
    col_degrees: np.ndarray


@dataclass(frozen=True)
class NormalizedBlock:
    """Degree-normalized block with a record of dropped empty lines.

    ``matrix`` is D1^(-1/2) A D2^(-1/2) over the kept rows/columns only;
    ``dropped_rows``/``dropped_cols`` hold block-local indices that had no
    nonzero entry and were excluded before normalization.
    """

    matrix: object
    degrees: DegreePair
    kept_rows: np.ndarray
    kept_cols: np.ndarray
    dropped_rows: np.ndarray
    dropped_cols: np.ndarray


@dataclass(frozen=True)
class SpectralEmbedding:
    """Stacked embedding: first n_rows rows embed block rows, the rest
    embed block columns.  Column i holds the (i+2)-th singular pair scaled
    by the inverse square-root degrees; the trivial first pair is dropped."""

    coords: np.ndarray
    n_rows: int
    n_cols: int
    n_components: int
    singular_values: np.ndarray


@dataclass(frozen=True)
class BlockCoClusterResult:
    """Per-block labels in {1..k}; dropped (empty) lines carry label 0."""

    row_labels: np.ndarray
    col_labels: np.ndarray
    k: int
    inertia: float
    dropped_rows: np.ndarray
    dropped_cols: np.ndarray
    embedding: SpectralEmbedding | None = None


def _block_values(block):
    if isinstance(block, BlockView):
        return block.values()
    if sp.issparse(block):
        return sp.csr_array(block)
    return np.asarray(block, dtype=np.float64)


def normalize(block):
    """Drop empty rows/columns, then scale to A_n = D1^(-1/2) A D2^(-1/2).

    Raises EmptyBlockError when the block has no nonzero entry at all.
    """
    values = _block_values(block)
    sparse = sp.issparse(values)
    if sparse:
        row_sums = np.asarray(values.sum(axis=1)).ravel()
        col_sums = np.asarray(values.sum(axis=0)).ravel()
    else:
        row_sums = values.sum(axis=1)
        col_sums = values.sum(axis=0)
    kept_rows = np.flatnonzero(row_sums > 0)
    kept_cols = np.flatnonzero(col_sums > 0)
    if kept_rows.size == 0 or kept_cols.size == 0:
        raise EmptyBlockError("empty block")
    dropped_rows = np.flatnonzero(row_sums == 0)
    dropped_cols = np.flatnonzero(col_sums == 0)
    # dropped lines are all-zero, so kept-line degrees are unaffected
    d1 = row_sums[kept_rows]
    d2 = col_sums[kept_cols]
    if sparse:
        sub = values[kept_rows][:, kept_cols]
        scaled = sp.csr_array(
            sub.multiply(1.0 / np.sqrt(d1)[:, None]).multiply(
                1.0 / np.sqrt(d2)[None, :]
            )
        )
    else:
        sub = values[np.ix_(kept_rows, kept_cols)]
        scaled = sub / np.sqrt(d1)[:, None] / np.sqrt(d2)[None, :]
    return NormalizedBlock(
        matrix=scaled,
        degrees=DegreePair(row_degrees=d1, col_degrees=d2),
        kept_rows=kept_rows,
        kept_cols=kept_cols,
        dropped_rows=dropped_rows,
        dropped_cols=dropped_cols,
    )


def _canonical_signs(u, vt):
    """Fix the sign ambiguity: the largest-magnitude entry of each left
    vector is made positive, with the paired right vector flipped along."""
    for i in range(u.shape[1]):
        j = int(np.argmax(np.abs(u[:, i])))
        if u[j, i] < 0:
            u[:, i] = -u[:, i]
            vt[i, :] = -vt[i, :]
    return u, vt


def _subspace_svd(a, count, seed, max_iter, tol):
    """Randomized subspace iteration for the leading singular triplets.

    Stops once the singular-value estimates change by less than ``tol`` AND
    the triplet residuals clear the contract tolerance; near-degenerate
    leading values stabilize long before their vectors, so the value test
    alone would stop too early.
    """
    n_rows, n_cols = a.shape
    width = min(min(n_rows, n_cols), count + 6)
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(a @ rng.standard_normal((n_cols, width)))[0]
    prev = None
    result = None
    for _ in range(max_iter):
        right = np.linalg.qr(a.T @ basis)[0]
        basis, mixing = np.linalg.qr(a @ right)
        estimates = np.linalg.svd(mixing, compute_uv=False)[:count]
        values_settled = prev is not None and np.max(
            np.abs(estimates - prev)
        ) <= tol * max(float(estimates[0]), 1e-30)
        prev = estimates
        if values_settled:
            small = (a.T @ basis).T  # width x n_cols, dense
            u_small, s, vt = np.linalg.svd(small, full_matrices=False)
            u = basis @ u_small
            result = (u[:, :count], s[:count], vt[:count, :])
            residuals = np.linalg.norm(
                a @ result[2].T - result[0] * result[1][None, :], axis=0
            )
            if np.all(residuals <= 1e-7):
                return result
    if result is None:
        small = (a.T @ basis).T
        u_small, s, vt = np.linalg.svd(small, full_matrices=False)
        u = basis @ u_small
        result = (u[:, :count], s[:count], vt[:count, :])
    return result


def truncated_svd(a_n, count, seed=0, method="auto", max_iter=300, tol=1e-8):
    """Leading ``count`` singular triplets of the normalized block.

    ``method`` selects the path: "exact" runs a full dense SVD, "iterative"
    a seeded randomized subspace iteration (iteration cap ``max_iter``,
    tolerance ``tol`` on singular-value change).  "auto" uses the exact
    path for dense blocks and for any block whose smaller side is <= 64,
    the iterative path for larger sparse blocks.

    Returns (U, s, Vt) with s non-increasing, orthonormal vectors, and
    per-triplet residual ||A_n v - s u|| verified below 1e-6.
    """
    sparse = sp.issparse(a_n)
    if not sparse:
        a_n = np.asarray(a_n, dtype=np.float64)
    n_rows, n_cols = a_n.shape
    count = int(count)
    if count < 1:
        raise ConfigError("need at least one singular triplet")
    if count > min(n_rows, n_cols):
        raise NumericalError(
            f"block of shape {(n_rows, n_cols)} cannot yield {count} singular triplets"
        )
    if method == "auto":
        if not sparse or min(n_rows, n_cols) <= _DENSE_SVD_LIMIT:
            method = "exact"
        else:
            method = "iterative"
    if method == "exact":
        dense = a_n.toarray() if sparse else a_n
        u, s, vt = np.linalg.svd(dense, full_matrices=False)
        u, s, vt = u[:, :count], s[:count], vt[:count, :]
    elif method == "iterative":
        # subspace iteration needs slack between count and the block side
        if min(n_rows, n_cols) <= count + 2:
            dense = a_n.toarray() if sparse else a_n
            u, s, vt = np.linalg.svd(dense, full_matrices=False)
            u, s, vt = u[:, :count], s[:count], vt[:count, :]
        else:
            u, s, vt = _subspace_svd(a_n, count, seed, max_iter, tol)
    else:
        raise ConfigError(f"unknown svd method {method!r}")
    u = np.ascontiguousarray(u)
    vt = np.ascontiguousarray(vt)
    u, vt = _canonical_signs(u, vt)
    residuals = np.linalg.norm(a_n @ vt.T - u * s[None, :], axis=0)
    if np.any(residuals > 1e-6):
        raise SvdConvergenceError(
            f"svd residuals {residuals.tolist()} exceed 1e-6 after {max_iter} iterations"
        )
    return u, s, vt


def embedding_dim(k):
    """Retained singular pairs for k clusters: ceil(log2 k)."""
    if k < 2:
        raise ConfigError("cluster count must be >= 2")
    return max(1, math.ceil(math.log2(k)))


def build_embedding(u, s, vt, degrees, k):
    """Stack degree-scaled singular vectors, discarding the trivial pair.

    The embedding keeps pairs 2..l+1 with l = ceil(log2 k); its rows are
    [D1^(-1/2) U-hat ; D2^(-1/2) V-hat].
    """
    l = embedding_dim(k)
    if u.shape[1] < l + 1:
        raise NumericalError(
            f"need {l + 1} singular triplets for k={k}, got {u.shape[1]}"
        )
    d1 = degrees.row_degrees
    d2 = degrees.col_degrees
    z_rows = u[:, 1 : l + 1] / np.sqrt(d1)[:, None]
    z_cols = vt[1 : l + 1, :].T / np.sqrt(d2)[:, None]
    return SpectralEmbedding(
        coords=np.vstack([z_rows, z_cols]),
        n_rows=len(d1),
        n_cols=len(d2),
        n_components=l,
        singular_values=np.array(s[: l + 1]),
    )


def _kmeans_pp(points, k, rng):
    n = len(points)
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[int(rng.integers(n))]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[c] = points[idx]
        closest = np.minimum(closest, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(points, k, centers, max_iter, tol):
    x_sq = (points**2).sum(axis=1)
    labels = np.zeros(len(points), dtype=np.int64)
    for _ in range(max_iter):
        dist = x_sq[:, None] - 2.0 * points @ centers.T + (centers**2).sum(axis=1)
        np.maximum(dist, 0.0, out=dist)
        labels = np.argmin(dist, axis=1)
        # re-seed empty clusters from the points farthest from their centers
        assigned = dist[np.arange(len(points)), labels].copy()
        for c in range(k):
            if not np.any(labels == c):
                idx = int(np.argmax(assigned))
                labels[idx] = c
                assigned[idx] = -1.0
        new_centers = np.zeros_like(centers)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        for dim in range(points.shape[1]):
            new_centers[:, dim] = np.bincount(
                labels, weights=points[:, dim], minlength=k
            )
        new_centers /= np.maximum(counts, 1.0)[:, None]
        shift = float(((new_centers - centers) ** 2).sum())
        centers = new_centers
        if shift <= tol:
            break
    dist = x_sq[:, None] - 2.0 * points @ centers.T + (centers**2).sum(axis=1)
    np.maximum(dist, 0.0, out=dist)
    labels = np.argmin(dist, axis=1)
    inertia = float(dist[np.arange(len(points)), labels].sum())
    return labels, inertia


def kmeans(points, k, seed=0, n_init=10, max_iter=100, tol=1e-12):
    """k-means with k-means++ seeding, best of ``n_init`` restarts.

    Returns 1-based labels and the final inertia.  Deterministic for a
    fixed seed; distance ties resolve toward the lowest cluster id.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = len(points)
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > n:
        raise NumericalError(f"k={k} exceeds the {n} available points")
    if np.unique(points, axis=0).shape[0] < k:
        warnings.warn(
            f"fewer than k={k} distinct points; some clusters will stay degenerate",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(n_init):
        centers = _kmeans_pp(points, k, rng)
        labels, inertia = _lloyd(points, k, centers, max_iter, tol)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels + 1, best_inertia


def cocluster_block(block, k, seed=0, svd_method="auto", capture_embedding=False):
    """Co-cluster one block: normalize, truncated SVD, embed, k-means.

    Row labels come from the first rows of the embedding clustering, column
    labels from the rest.  Dropped (all-zero) rows/columns are reported
    with label 0 and listed in ``dropped_rows``/``dropped_cols``.
    """
    if k < 2:
        raise ConfigError("cluster count must be >= 2")
    values = _block_values(block)
    trimmed = normalize(values)
    count = embedding_dim(k) + 1
    svd_seed, km_seed = (
        int(x) for x in np.random.SeedSequence(seed).generate_state(2, np.uint64)
    )
    u, s, vt = truncated_svd(trimmed.matrix, count, seed=svd_seed, method=svd_method)
    emb = build_embedding(u, s, vt, trimmed.degrees, k)
    labels, inertia = kmeans(emb.coords, k, seed=km_seed)
    n_rows, n_cols = values.shape
    row_labels = np.zeros(n_rows, dtype=np.int64)
    col_labels = np.zeros(n_cols, dtype=np.int64)
    row_labels[trimmed.kept_rows] = labels[: emb.n_rows]
    col_labels[trimmed.kept_cols] = labels[emb.n_rows :]
    return BlockCoClusterResult(
        row_labels=row_labels,
        col_labels=col_labels,
        k=k,
        inertia=inertia,
        dropped_rows=trimmed.dropped_rows,
        dropped_cols=trimmed.dropped_cols,
        embedding=emb if capture_embedding else None,
    )
