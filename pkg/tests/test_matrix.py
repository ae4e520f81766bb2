import numpy as np
import pytest
import scipy.sparse as sp

from lamc.errors import ConfigError, DataDomainError, MatrixFormatError
from lamc.matrix import (
    DataMatrix,
    PlantedCoCluster,
    PlantedGroundTruth,
    extract_blocks,
    generate_planted,
    load_dense_csv,
    load_matrix_market,
    load_planted_spec,
    permute,
    planted_block_diagonal,
    uniform_split,
    write_matrix_market,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestMatrixMarket:
    def test_coordinate_identity_roundtrip(self, tmp_path):
        path = write(
            tmp_path,
            "id.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 1.0\n",
        )
        m = load_matrix_market(path)
        assert m.shape == (2, 2)
        assert m.storage_kind == "sparse"
        assert np.array_equal(m.toarray(), np.eye(2))

    def test_empty_coordinate_section(self, tmp_path):
        path = write(
            tmp_path,
            "zero.mtx",
            "%%MatrixMarket matrix coordinate real general\n3 4 0\n",
        )
        m = load_matrix_market(path)
        assert m.shape == (3, 4)
        assert m.nnz == 0

    def test_negative_entry_names_line(self, tmp_path):
        path = write(
            tmp_path,
            "neg.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 -1.0\n",
        )
        with pytest.raises(DataDomainError, match="line 3"):
            load_matrix_market(path)

    def test_array_format(self, tmp_path):
        # column-major: [[1, 3], [2, 4]]
        path = write(
            tmp_path,
            "arr.mtx",
            "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
        )
        m = load_matrix_market(path)
        assert m.storage_kind == "dense"
        assert np.array_equal(m.toarray(), np.array([[1.0, 3.0], [2.0, 4.0]]))

    def test_rejects_symmetric_and_pattern(self, tmp_path):
        sym = write(
            tmp_path,
            "sym.mtx",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 1.0\n",
        )
        with pytest.raises(MatrixFormatError, match="symmetry"):
            load_matrix_market(sym)
        pat = write(
            tmp_path,
            "pat.mtx",
            "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n",
        )
        with pytest.raises(MatrixFormatError, match="field"):
            load_matrix_market(pat)

    def test_duplicate_entry_rejected(self, tmp_path):
        path = write(
            tmp_path,
            "dup.mtx",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n",
        )
        with pytest.raises(MatrixFormatError, match="duplicate"):
            load_matrix_market(path)

    def test_malformed_banner(self, tmp_path):
        path = write(tmp_path, "bad.mtx", "not a banner\n2 2 0\n")
        with pytest.raises(MatrixFormatError, match="banner"):
            load_matrix_market(path)

    @pytest.mark.parametrize("storage", ["dense", "sparse"])
    def test_write_read_roundtrip(self, tmp_path, storage):
        rng = np.random.default_rng(7)
        dense = np.round(rng.random((5, 3)) * (rng.random((5, 3)) < 0.5), 6)
        data = sp.csr_array(dense) if storage == "sparse" else dense
        m = DataMatrix(data)
        path = tmp_path / "rt.mtx"
        write_matrix_market(m, path)
        back = load_matrix_market(path)
        assert np.array_equal(back.toarray(), m.toarray())


class TestDenseCsv:
    def test_identity(self, tmp_path):
        m = load_dense_csv(write(tmp_path, "a.csv", "1,0\n0,1\n"))
        assert np.array_equal(m.toarray(), np.eye(2))

    def test_single_row(self, tmp_path):
        m = load_dense_csv(write(tmp_path, "b.csv", "1,2,3\n"))
        assert m.shape == (1, 3)

    def test_ragged_row_errors_at_line(self, tmp_path):
        with pytest.raises(MatrixFormatError, match="line 2"):
            load_dense_csv(write(tmp_path, "c.csv", "1,2\n3\n"))

    def test_header_skipped(self, tmp_path):
        m = load_dense_csv(write(tmp_path, "d.csv", "x,y\n1,2\n"), has_header=True)
        assert m.shape == (1, 2)

    def test_non_numeric_field(self, tmp_path):
        with pytest.raises(MatrixFormatError, match="non-numeric"):
            load_dense_csv(write(tmp_path, "e.csv", "1,foo\n"))

    def test_negative_value(self, tmp_path):
        with pytest.raises(DataDomainError, match="negative"):
            load_dense_csv(write(tmp_path, "f.csv", "1,-2\n"))


class TestDataMatrix:
    def test_rejects_negative_dense(self):
        with pytest.raises(DataDomainError):
            DataMatrix(np.array([[1.0, -0.5]]))

    def test_rejects_nan(self):
        with pytest.raises(DataDomainError):
            DataMatrix(np.array([[np.nan, 1.0]]))

    def test_rejects_empty(self):
        with pytest.raises(DataDomainError):
            DataMatrix(np.zeros((0, 3)))


class TestPlanted:
    def test_exact_block_diagonal_when_noiseless(self):
        truth = PlantedGroundTruth(
            coclusters=(
                PlantedCoCluster(rows=(0, 1), cols=(0, 1)),
                PlantedCoCluster(rows=(2, 3), cols=(2, 3)),
            ),
            noise_rate=0.0,
            seed=5,
        )
        m = generate_planted(4, 4, truth)
        expected = np.zeros((4, 4))
        expected[:2, :2] = 1.0
        expected[2:, 2:] = 1.0
        assert np.array_equal(m.toarray(), expected)

    def test_deterministic_per_seed(self):
        truth = planted_block_diagonal(30, 20, 3, noise_rate=0.1, seed=42)
        a = generate_planted(30, 20, truth).toarray()
        b = generate_planted(30, 20, truth).toarray()
        assert np.array_equal(a, b)

    def test_background_density_binomial(self):
        # background nonzero count ~ Binomial(n_background, 0.01); the
        # [0.005, 0.02] window is a > 4-sigma interval for this seed
        truth = PlantedGroundTruth(
            coclusters=(PlantedCoCluster(rows=tuple(range(10)), cols=tuple(range(8))),),
            noise_rate=0.01,
            seed=123,
        )
        m = generate_planted(100, 80, truth)
        arr = m.toarray()
        background = arr.copy()
        background[:10, :8] = 0.0
        n_background = 100 * 80 - 10 * 8
        density = background.sum() / n_background
        assert 0.005 <= density <= 0.02

    def test_overlapping_rows_rejected(self):
        truth = PlantedGroundTruth(
            coclusters=(
                PlantedCoCluster(rows=(0, 1), cols=(0, 1)),
                PlantedCoCluster(rows=(1, 2), cols=(2, 3)),
            ),
        )
        with pytest.raises(ConfigError, match="overlap"):
            generate_planted(4, 4, truth)

    def test_labels_and_spec_roundtrip(self, tmp_path):
        import json

        truth = planted_block_diagonal(6, 6, 2, seed=1)
        rl, cl = truth.labels(6, 6)
        assert rl.tolist() == [1, 1, 1, 2, 2, 2]
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(truth.to_dict(6, 6)), encoding="utf-8")
        n_rows, n_cols, back = load_planted_spec(path)
        assert (n_rows, n_cols) == (6, 6)
        assert back.labels(6, 6)[0].tolist() == rl.tolist()

    def test_sparse_storage(self):
        truth = planted_block_diagonal(10, 10, 2, seed=3)
        m = generate_planted(10, 10, truth, storage="sparse")
        assert m.storage_kind == "sparse"
        dense = generate_planted(10, 10, truth, storage="dense")
        assert np.array_equal(m.toarray(), dense.toarray())


class TestPermute:
    def test_identity_perms(self):
        m = DataMatrix(np.arange(6, dtype=float).reshape(2, 3))
        out = permute(m, [0, 1], [0, 1, 2])
        assert np.array_equal(out.toarray(), m.toarray())

    def test_row_swap_gives_antidiagonal(self):
        out = permute(DataMatrix(np.eye(2)), [1, 0], [0, 1])
        assert np.array_equal(out.toarray(), np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_inverse_restores(self):
        rng = np.random.default_rng(0)
        m = DataMatrix(rng.random((7, 5)))
        rp, cp = rng.permutation(7), rng.permutation(5)
        inv_r, inv_c = np.argsort(rp), np.argsort(cp)
        back = permute(permute(m, rp, cp), inv_r, inv_c)
        assert np.array_equal(back.toarray(), m.toarray())
        assert np.array_equal(back.row_ids, m.row_ids)

    def test_measure_preserving(self):
        rng = np.random.default_rng(1)
        m = DataMatrix(rng.random((6, 4)))
        out = permute(m, rng.permutation(6), rng.permutation(4))
        assert np.array_equal(np.sort(out.toarray(), axis=None), np.sort(m.toarray(), axis=None))

    def test_semantics_output_is_input_at_perm(self):
        m = DataMatrix(np.arange(12, dtype=float).reshape(3, 4))
        rp, cp = [2, 0, 1], [3, 2, 1, 0]
        out = permute(m, rp, cp)
        for r in range(3):
            for c in range(4):
                assert out.toarray()[r, c] == m.toarray()[rp[r], cp[c]]

    def test_sparse_permute(self):
        dense = np.diag([1.0, 2.0, 3.0])
        m = DataMatrix(sp.csr_array(dense))
        out = permute(m, [2, 1, 0], [0, 1, 2])
        assert np.array_equal(out.toarray(), dense[[2, 1, 0]])

    def test_bad_perms_rejected(self):
        m = DataMatrix(np.eye(3))
        with pytest.raises(ConfigError, match="length"):
            permute(m, [0, 1], np.arange(3))
        with pytest.raises(ConfigError, match="duplicate"):
            permute(m, [0, 1, 1], np.arange(3))


class TestExtractBlocks:
    def test_2x2_grid(self):
        m = DataMatrix(np.arange(16, dtype=float).reshape(4, 4))
        blocks = extract_blocks(m, [2, 2], [2, 2])
        assert len(blocks) == 4
        assert [b.block_coords for b in blocks] == [(1, 1), (1, 2), (2, 1), (2, 2)]
        assert all(b.shape == (2, 2) for b in blocks)
        assert np.array_equal(blocks[3].values(), m.toarray()[2:, 2:])

    def test_single_block_is_whole_matrix(self):
        m = DataMatrix(np.ones((3, 5)))
        (block,) = extract_blocks(m, [3], [5])
        assert block.shape == (3, 5)
        assert np.array_equal(block.values(), m.toarray())

    def test_uneven_spans(self):
        m = DataMatrix(np.ones((5, 5)))
        blocks = extract_blocks(m, [2, 3], [1, 4])
        assert [b.shape for b in blocks] == [(2, 1), (2, 4), (3, 1), (3, 4)]

    def test_size_sum_mismatch(self):
        m = DataMatrix(np.ones((4, 4)))
        with pytest.raises(ConfigError, match="sum"):
            extract_blocks(m, [2, 1], [2, 2])

    def test_cell_coverage(self):
        # every cell belongs to exactly one block
        m = DataMatrix(np.ones((6, 7)))
        blocks = extract_blocks(m, [2, 2, 2], [3, 4])
        assert sum(b.n_rows * b.n_cols for b in blocks) == 42

    def test_spans_carry_global_ids(self):
        m = DataMatrix(np.arange(16, dtype=float).reshape(4, 4))
        shuffled = permute(m, [3, 2, 1, 0], [0, 1, 2, 3])
        blocks = extract_blocks(shuffled, [2, 2], [2, 2])
        assert blocks[0].row_span.tolist() == [3, 2]

    def test_uniform_split(self):
        assert uniform_split(10, 4) == [3, 3, 2, 2]
        assert uniform_split(8, 4) == [2, 2, 2, 2]
        with pytest.raises(ConfigError):
            uniform_split(3, 5)
