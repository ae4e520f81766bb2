"""Matrix storage, file ingestion, permutation/block extraction, synthetic data.

The central type is :class:`DataMatrix`: an immutable nonnegative matrix,
dense or sparse, that carries stable global row/column identifiers so that
views and permutations can always be traced back to the original indices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataDomainError, MatrixFormatError

__all__ = [
    "DataMatrix",
    "BlockView",
    "PlantedCoCluster",
    "PlantedGroundTruth",
    "load_matrix_market",
    "write_matrix_market",
    "load_dense_csv",
    "generate_planted",
    "planted_block_diagonal",
    "load_planted_spec",
    "permute",
    "extract_blocks",
    "uniform_split",
]


class DataMatrix:
    """Nonnegative M x N matrix with global row/column identities.

    Wraps either a dense ``ndarray`` or a CSR sparse matrix (absent entries
    are zeros).  Instances are treated as immutable after construction and
    may be shared freely across threads.

    Parameters
    ----------
    data : ndarray or scipy sparse matrix
        Matrix values; must be finite and >= 0 everywhere.
    row_ids, col_ids : ndarray of int, optional
        Stable 0-based global identifiers; default to ``arange``.
    """

    def __init__(self, data, row_ids=None, col_ids=None, _validate=True):
        if sp.issparse(data):
            data = sp.csr_array(data)
            data.sum_duplicates()
            self._data = data
            self._sparse = True
        else:
            self._data = np.asarray(data, dtype=np.float64)
            if self._data.ndim != 2:
                raise DataDomainError("dense data must be 2-dimensional")
            self._sparse = False
        m, n = self._data.shape
        if m < 1 or n < 1:
            raise DataDomainError("matrix must have at least one row and column")
        if _validate:
            values = self._data.data if self._sparse else self._data
            if values.size and not np.all(np.isfinite(values)):
                raise DataDomainError("matrix contains non-finite values")
            if values.size and values.min(initial=0.0) < 0:
                raise DataDomainError("matrix contains negative values")
        self.row_ids = (
            np.arange(m) if row_ids is None else np.asarray(row_ids, dtype=np.int64)
        )
        self.col_ids = (
            np.arange(n) if col_ids is None else np.asarray(col_ids, dtype=np.int64)
        )
        if len(self.row_ids) != m or len(self.col_ids) != n:
            raise DataDomainError("row/col id length does not match matrix shape")
        self.row_ids.setflags(write=False)
        self.col_ids.setflags(write=False)

    @property
    def n_rows(self):
        return self._data.shape[0]

    @property
    def n_cols(self):
        return self._data.shape[1]

    @property
    def shape(self):
        return self._data.shape

    @property
    def storage_kind(self):
        return "sparse" if self._sparse else "dense"

    @property
    def data(self):
        """Underlying ndarray (dense) or CSR matrix (sparse)."""
        return self._data

    @property
    def nnz(self):
        if self._sparse:
            return int(self._data.nnz)
        return int(np.count_nonzero(self._data))

    def toarray(self):
        if self._sparse:
            return self._data.toarray()
        return np.array(self._data)

    def __repr__(self):
        return (
            f"DataMatrix(shape={self.shape}, storage={self.storage_kind!r}, "
            f"nnz={self.nnz})"
        )


@dataclass(frozen=True)
class BlockView:
    """Read-only window onto a contiguous block of a (permuted) DataMatrix.

    ``block_coords`` is 1-based ``(i, j)`` within the grid; spans translate
    block-local indices back to global row/column ids of the parent.
    """

    parent: DataMatrix
    block_coords: tuple[int, int]
    row_start: int
    row_stop: int
    col_start: int
    col_stop: int

    @property
    def n_rows(self):
        return self.row_stop - self.row_start

    @property
    def n_cols(self):
        return self.col_stop - self.col_start

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def row_span(self):
        """Global row ids covered by this block, in block-local order."""
        return self.parent.row_ids[self.row_start : self.row_stop]

    @property
    def col_span(self):
        return self.parent.col_ids[self.col_start : self.col_stop]

    def values(self):
        """Block submatrix (dense view for dense parents, CSR for sparse)."""
        sub = self.parent.data[
            self.row_start : self.row_stop, self.col_start : self.col_stop
        ]
        return sub


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------


def _mm_parse_value(token, line_no):
    try:
        value = float(token)
    except ValueError:
        raise MatrixFormatError(f"line {line_no}: non-numeric value {token!r}") from None
    if not np.isfinite(value):
        raise DataDomainError(f"line {line_no}: non-finite value {token!r}")
    if value < 0:
        raise DataDomainError(f"line {line_no}: negative value {value}")
    return value


def load_matrix_market(path):
    """Read a Matrix Market file into a DataMatrix.

    Supports the ``coordinate`` and ``array`` formats with ``real`` or
    ``integer`` fields and ``general`` symmetry.  Coordinate input yields a
    sparse matrix, array input a dense one.  Negative, non-finite or
    duplicate entries are rejected with the offending line number.
    """
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise MatrixFormatError(f"{path}: empty file")
    banner = lines[0].split()
    if len(banner) != 5 or banner[0] != "%%MatrixMarket":
        raise MatrixFormatError(f"{path}: line 1: malformed MatrixMarket banner")
    _, obj, fmt, field_kind, symmetry = (tok.lower() for tok in banner)
    if obj != "matrix":
        raise MatrixFormatError(f"{path}: unsupported object {obj!r}")
    if fmt not in ("coordinate", "array"):
        raise MatrixFormatError(f"{path}: unsupported format {fmt!r}")
    if field_kind not in ("real", "integer"):
        raise MatrixFormatError(f"{path}: unsupported field {field_kind!r}")
    if symmetry != "general":
        raise MatrixFormatError(f"{path}: unsupported symmetry {symmetry!r}")

    # skip comments, locate the size line
    idx = 1
    while idx < len(lines) and (lines[idx].startswith("%") or not lines[idx].strip()):
        idx += 1
    if idx >= len(lines):
        raise MatrixFormatError(f"{path}: missing size line")
    size_tokens = lines[idx].split()
    size_line_no = idx + 1

    if fmt == "coordinate":
        if len(size_tokens) != 3:
            raise MatrixFormatError(
                f"{path}: line {size_line_no}: coordinate size line needs 3 fields"
            )
        try:
            n_rows, n_cols, n_entries = (int(tok) for tok in size_tokens)
        except ValueError:
            raise MatrixFormatError(
                f"{path}: line {size_line_no}: non-integer size field"
            ) from None
        rows, cols, vals = [], [], []
        seen = set()
        entry_count = 0
        for offset, raw in enumerate(lines[idx + 1 :], start=size_line_no + 1):
            if not raw.strip() or raw.startswith("%"):
                continue
            tokens = raw.split()
            if len(tokens) != 3:
                raise MatrixFormatError(
                    f"{path}: line {offset}: expected 'row col value'"
                )
            try:
                r, c = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise MatrixFormatError(
                    f"{path}: line {offset}: non-integer index"
                ) from None
            if not (1 <= r <= n_rows and 1 <= c <= n_cols):
                raise MatrixFormatError(
                    f"{path}: line {offset}: index ({r}, {c}) out of bounds"
                )
            if (r, c) in seen:
                raise MatrixFormatError(
                    f"{path}: line {offset}: duplicate entry ({r}, {c})"
                )
            seen.add((r, c))
            value = _mm_parse_value(tokens[2], offset)
            rows.append(r - 1)
            cols.append(c - 1)
            vals.append(value)
            entry_count += 1
        if entry_count != n_entries:
            raise MatrixFormatError(
                f"{path}: declared {n_entries} entries, found {entry_count}"
            )
        coo = sp.coo_array(
            (vals, (rows, cols)), shape=(n_rows, n_cols), dtype=np.float64
        )
        return DataMatrix(coo.tocsr(), _validate=False)

    # array format: dense values in column-major order
    if len(size_tokens) != 2:
        raise MatrixFormatError(
            f"{path}: line {size_line_no}: array size line needs 2 fields"
        )
    try:
        n_rows, n_cols = (int(tok) for tok in size_tokens)
    except ValueError:
        raise MatrixFormatError(
            f"{path}: line {size_line_no}: non-integer size field"
        ) from None
    values = []
    for offset, raw in enumerate(lines[idx + 1 :], start=size_line_no + 1):
        if not raw.strip() or raw.startswith("%"):
            continue
        for token in raw.split():
            values.append(_mm_parse_value(token, offset))
    if len(values) != n_rows * n_cols:
        raise MatrixFormatError(
            f"{path}: expected {n_rows * n_cols} values, found {len(values)}"
        )
    dense = np.array(values, dtype=np.float64).reshape((n_cols, n_rows)).T
    return DataMatrix(dense, _validate=False)


def write_matrix_market(matrix, path):
    """Write a DataMatrix in Matrix Market format (round-trip safe).

    Sparse matrices use the coordinate format, dense ones the array format.
    """
    with open(path, "w", encoding="utf-8") as handle:
        if matrix.storage_kind == "sparse":
            coo = sp.coo_array(matrix.data)
            handle.write("%%MatrixMarket matrix coordinate real general\n")
            handle.write(f"{matrix.n_rows} {matrix.n_cols} {coo.nnz}\n")
            order = np.lexsort((coo.col, coo.row))
            for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                handle.write(f"{r + 1} {c + 1} {float(v)!r}\n")
        else:
            handle.write("%%MatrixMarket matrix array real general\n")
            handle.write(f"{matrix.n_rows} {matrix.n_cols}\n")
            for c in range(matrix.n_cols):
                for r in range(matrix.n_rows):
                    handle.write(f"{float(matrix.data[r, c])!r}\n")


def load_dense_csv(path, has_header=False):
    """Read a rectangular numeric CSV into a dense DataMatrix."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if line_no == 1 and has_header:
                continue
            if not line.strip():
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise MatrixFormatError(
                    f"{path}: line {line_no}: expected {width} fields, got {len(fields)}"
                )
            parsed = []
            for tok in fields:
                try:
                    value = float(tok)
                except ValueError:
                    raise MatrixFormatError(
                        f"{path}: line {line_no}: non-numeric field {tok.strip()!r}"
                    ) from None
                if not np.isfinite(value):
                    raise DataDomainError(
                        f"{path}: line {line_no}: non-finite value {tok.strip()!r}"
                    )
                if value < 0:
                    raise DataDomainError(
                        f"{path}: line {line_no}: negative value {value}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise MatrixFormatError(f"{path}: no data rows")
    return DataMatrix(np.array(rows, dtype=np.float64), _validate=False)


# ---------------------------------------------------------------------------
# Synthetic planted co-cluster data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlantedCoCluster:
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    signal: float = 1.0


@dataclass(frozen=True)
class PlantedGroundTruth:
    """Planted co-cluster layout: disjoint row/col sets plus background noise.

    An entry inside co-cluster ``c`` is nonzero with probability
    ``c.signal``; a background entry is nonzero with probability
    ``noise_rate``.  Nonzero entries take the value 1.0.
    """

    coclusters: tuple[PlantedCoCluster, ...]
    noise_rate: float = 0.0
    seed: int = 0

    def validate(self, n_rows, n_cols):
        seen_rows, seen_cols = set(), set()
        if not (0.0 <= self.noise_rate <= 1.0):
            raise ConfigError("noise_rate must lie in [0, 1]")
        for cc in self.coclusters:
            if not cc.rows or not cc.cols:
                raise ConfigError("planted co-cluster must be non-empty")
            if min(cc.rows) < 0 or max(cc.rows) >= n_rows:
                raise ConfigError("planted row set out of bounds")
            if min(cc.cols) < 0 or max(cc.cols) >= n_cols:
                raise ConfigError("planted col set out of bounds")
            if seen_rows.intersection(cc.rows):
                raise ConfigError("planted row sets overlap")
            if seen_cols.intersection(cc.cols):
                raise ConfigError("planted col sets overlap")
            if cc.signal <= self.noise_rate:
                raise ConfigError("signal level must exceed the noise rate")
            if cc.signal > 1.0:
                raise ConfigError("signal level is a probability, must be <= 1")
            seen_rows.update(cc.rows)
            seen_cols.update(cc.cols)

    def labels(self, n_rows, n_cols):
        """Ground-truth labels: co-cluster index + 1, background = K + 1."""
        background = len(self.coclusters) + 1
        row_labels = np.full(n_rows, background, dtype=np.int64)
        col_labels = np.full(n_cols, background, dtype=np.int64)
        for idx, cc in enumerate(self.coclusters, start=1):
            row_labels[list(cc.rows)] = idx
            col_labels[list(cc.cols)] = idx
        return row_labels, col_labels

    def to_dict(self, n_rows, n_cols):
        return {
            "M": n_rows,
            "N": n_cols,
            "coclusters": [
                {"rows": sorted(cc.rows), "cols": sorted(cc.cols), "signal": cc.signal}
                for cc in self.coclusters
            ],
            "noise_rate": self.noise_rate,
            "seed": self.seed,
        }


def load_planted_spec(path):
    """Load a planted-truth JSON document -> (M, N, PlantedGroundTruth)."""
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    try:
        n_rows, n_cols = int(doc["M"]), int(doc["N"])
        coclusters = tuple(
            PlantedCoCluster(
                rows=tuple(int(r) for r in entry["rows"]),
                cols=tuple(int(c) for c in entry["cols"]),
                signal=float(entry.get("signal", 1.0)),
            )
            for entry in doc["coclusters"]
        )
        truth = PlantedGroundTruth(
            coclusters=coclusters,
            noise_rate=float(doc.get("noise_rate", 0.0)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MatrixFormatError(f"{path}: malformed planted-truth spec: {exc}") from exc
    truth.validate(n_rows, n_cols)
    return n_rows, n_cols, truth


def generate_planted(n_rows, n_cols, truth, storage="dense"):
    """Generate a matrix with planted co-clusters; deterministic per seed."""
    truth.validate(n_rows, n_cols)
    if storage not in ("dense", "sparse"):
        raise ConfigError(f"unknown storage kind {storage!r}")
    rng = np.random.default_rng(truth.seed)
    data = (rng.random((n_rows, n_cols)) < truth.noise_rate).astype(np.float64)
    for cc in truth.coclusters:
        rows = np.fromiter(cc.rows, dtype=np.int64)
        cols = np.fromiter(cc.cols, dtype=np.int64)
        block = (rng.random((len(rows), len(cols))) < cc.signal).astype(np.float64)
        data[np.ix_(rows, cols)] = block
    if storage == "sparse":
        return DataMatrix(sp.csr_array(data), _validate=False)
    return DataMatrix(data, _validate=False)


def planted_block_diagonal(n_rows, n_cols, n_coclusters, signal=1.0, noise_rate=0.0, seed=0):
    """Convenience layout: contiguous co-clusters covering the whole matrix."""
    row_splits = np.array_split(np.arange(n_rows), n_coclusters)
    col_splits = np.array_split(np.arange(n_cols), n_coclusters)
    coclusters = tuple(
        PlantedCoCluster(rows=tuple(r.tolist()), cols=tuple(c.tolist()), signal=signal)
        for r, c in zip(row_splits, col_splits)
    )
    return PlantedGroundTruth(coclusters=coclusters, noise_rate=noise_rate, seed=seed)


# ---------------------------------------------------------------------------
# Permutation and block extraction
# ---------------------------------------------------------------------------


def _check_permutation(perm, size, axis):
    perm = np.asarray(perm, dtype=np.int64)
    if len(perm) != size:
        raise ConfigError(f"{axis} permutation length {len(perm)} != {size}")
    if not np.array_equal(np.sort(perm), np.arange(size)):
        raise ConfigError(f"{axis} permutation has duplicate or missing indices")
    return perm


def permute(matrix, row_perm, col_perm):
    """Reorder a DataMatrix: output(r, c) = input(row_perm[r], col_perm[c])."""
    row_perm = _check_permutation(row_perm, matrix.n_rows, "row")
    col_perm = _check_permutation(col_perm, matrix.n_cols, "col")
    if matrix.storage_kind == "sparse":
        data = matrix.data[row_perm][:, col_perm]
    else:
        data = matrix.data[np.ix_(row_perm, col_perm)]
    return DataMatrix(
        data,
        row_ids=matrix.row_ids[row_perm],
        col_ids=matrix.col_ids[col_perm],
        _validate=False,
    )


def uniform_split(total, parts):
    """Split ``total`` into ``parts`` contiguous sizes differing by at most 1."""
    if parts < 1 or parts > total:
        raise ConfigError(f"cannot split {total} into {parts} non-empty parts")
    base, extra = divmod(total, parts)
    return [base + 1] * extra + [base] * (parts - extra)


def extract_blocks(matrix, row_sizes, col_sizes):
    """Cut the matrix into an m x n grid of BlockViews in row-major order."""
    row_sizes = [int(s) for s in row_sizes]
    col_sizes = [int(s) for s in col_sizes]
    if any(s < 1 for s in row_sizes) or any(s < 1 for s in col_sizes):
        raise ConfigError("block sizes must be >= 1")
    if sum(row_sizes) != matrix.n_rows:
        raise ConfigError(
            f"row sizes sum to {sum(row_sizes)}, expected {matrix.n_rows}"
        )
    if sum(col_sizes) != matrix.n_cols:
        raise ConfigError(
            f"col sizes sum to {sum(col_sizes)}, expected {matrix.n_cols}"
        )
    row_edges = np.concatenate([[0], np.cumsum(row_sizes)])
    col_edges = np.concatenate([[0], np.cumsum(col_sizes)])
    blocks = []
    for i in range(len(row_sizes)):
        for j in range(len(col_sizes)):
            blocks.append(
                BlockView(
                    parent=matrix,
                    block_coords=(i + 1, j + 1),
                    row_start=int(row_edges[i]),
                    row_stop=int(row_edges[i + 1]),
                    col_start=int(col_edges[j]),
                    col_stop=int(col_edges[j + 1]),
                )
            )
    return blocks
