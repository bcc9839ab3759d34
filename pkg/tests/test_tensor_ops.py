"""Unit tests for the column-major tensor primitives."""

import numpy as np
import numpy.testing as npt
import pytest

from risce.tensor_ops import (
    effective_rank,
    khatri_rao_cols,
    khatri_rao_rows,
    kronecker,
    mode_n_fold,
    mode_n_product,
    mode_n_unfold,
    multimode_fold_12_34,
    multimode_unfold_12_34,
    pseudo_inverse,
    rank_one_approx,
    unvec,
    vec,
)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class TestVec:
    def test_vec_stacks_columns(self):
        a = np.array([[1, 3], [2, 4]], dtype=complex)
        npt.assert_array_equal(vec(a), np.array([1, 2, 3, 4], dtype=complex))

    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(0)
        for shape in [(3, 4), (5, 1), (2, 2, 3)]:
            x = crandn(rng, *shape)
            assert np.array_equal(unvec(vec(x), shape), x)
            v = crandn(rng, int(np.prod(shape)))
            assert np.array_equal(vec(unvec(v, shape)), v)


class TestKronecker:
    def test_identity_case(self):
        npt.assert_array_equal(kronecker(np.eye(2), np.eye(3)), np.eye(6))

    def test_identity_times_permutation(self):
        a = np.eye(2)
        b = np.array([[0, 1], [1, 0]], dtype=float)
        expected = np.zeros((4, 4))
        expected[:2, :2] = b
        expected[2:, 2:] = b
        npt.assert_array_equal(kronecker(a, b), expected)

    def test_elementwise_oracle(self):
        rng = np.random.default_rng(1)
        a = crandn(rng, 2, 2)
        b = crandn(rng, 2, 2)
        k = kronecker(a, b)
        for i in range(2):
            for r in range(2):
                for j in range(2):
                    for s in range(2):
                        assert k[i * 2 + j, r * 2 + s] == a[i, r] * b[j, s]


class TestKhatriRaoCols:
    def test_identity_columns(self):
        n = 3
        k = khatri_rao_cols(np.eye(n), np.eye(n))
        for r in range(n):
            e = np.zeros(n)
            e[r] = 1.0
            npt.assert_array_equal(k[:, r], np.kron(e, e))

    def test_single_column(self):
        rng = np.random.default_rng(2)
        a = crandn(rng, 3, 1)
        b = crandn(rng, 2, 1)
        npt.assert_array_equal(khatri_rao_cols(a, b), kronecker(a, b))

    def test_per_column_kron_oracle(self):
        rng = np.random.default_rng(3)
        a = crandn(rng, 3, 2)
        b = crandn(rng, 2, 2)
        k = khatri_rao_cols(a, b)
        for r in range(2):
            npt.assert_array_equal(k[:, r], np.kron(a[:, r], b[:, r]))

    def test_column_mismatch_raises(self):
        with pytest.raises(ValueError):
            khatri_rao_cols(np.ones((2, 2)), np.ones((2, 3)))


class TestKhatriRaoRows:
    def test_all_ones(self):
        out = khatri_rao_rows(np.ones((1, 2)), np.ones((1, 3)))
        npt.assert_array_equal(out, np.ones((1, 6)))

    def test_hand_expansion(self):
        a = np.array([[2.0, 3.0]])
        b = np.array([[5.0, 7.0]])
        npt.assert_array_equal(khatri_rao_rows(a, b), np.array([[10.0, 14.0, 15.0, 21.0]]))

    def test_transpose_consistency(self):
        rng = np.random.default_rng(4)
        a = crandn(rng, 4, 2)
        b = crandn(rng, 4, 3)
        npt.assert_array_equal(khatri_rao_rows(a, b).T, khatri_rao_cols(a.T, b.T))

    def test_row_mismatch_raises(self):
        with pytest.raises(ValueError):
            khatri_rao_rows(np.ones((2, 2)), np.ones((3, 2)))


def unfold_by_index_formula(x, mode):
    """Direct implementation of the unfolding index map (independent oracle)."""
    shape = x.shape
    rest = [m for m in range(x.ndim) if m != mode]
    out = np.zeros((shape[mode], int(np.prod([shape[m] for m in rest]))), dtype=x.dtype)
    for idx in np.ndindex(*shape):
        col = 0
        stride = 1
        for m in rest:
            col += idx[m] * stride
            stride *= shape[m]
        out[idx[mode], col] = x[idx]
    return out


class TestModeNUnfold:
    def test_order2(self):
        rng = np.random.default_rng(5)
        a = crandn(rng, 3, 4)
        npt.assert_array_equal(mode_n_unfold(a, 0), a)
        npt.assert_array_equal(mode_n_unfold(a, 1), a.T)

    def test_round_trip_all_modes(self):
        x = np.arange(24, dtype=complex).reshape(2, 3, 4)
        for mode in range(3):
            assert np.array_equal(mode_n_fold(mode_n_unfold(x, mode), mode, x.shape), x)

    def test_index_formula_oracle(self):
        rng = np.random.default_rng(6)
        x = crandn(rng, 2, 3, 4, 2)
        for mode in range(4):
            npt.assert_array_equal(mode_n_unfold(x, mode), unfold_by_index_formula(x, mode))

    def test_tucker_factored_form(self):
        # unfold(core x1 A1 ... x4 A4, n) = A_n @ unfold(core, n) @ kron(descending others).T
        rng = np.random.default_rng(7)
        core = crandn(rng, 2, 2, 2, 2)
        factors = [crandn(rng, 3, 2), crandn(rng, 2, 2), crandn(rng, 4, 2), crandn(rng, 2, 2)]
        x = core
        for mode, f in enumerate(factors):
            x = mode_n_product(x, f, mode)
        for mode in range(4):
            others = [factors[m] for m in range(4) if m != mode]
            kron = others[-1]
            for f in reversed(others[:-1]):
                kron = kronecker(kron, f)
            expected = factors[mode] @ mode_n_unfold(core, mode) @ kron.T
            npt.assert_allclose(mode_n_unfold(x, mode), expected, rtol=1e-12, atol=1e-12)

    def test_mode_out_of_range(self):
        with pytest.raises(ValueError):
            mode_n_unfold(np.ones((2, 2)), 2)


class TestModeNProduct:
    def test_identity_factor(self):
        rng = np.random.default_rng(8)
        x = crandn(rng, 2, 3, 4)
        for mode in range(3):
            npt.assert_array_equal(mode_n_product(x, np.eye(x.shape[mode]), mode), x)

    def test_composition_same_mode(self):
        rng = np.random.default_rng(9)
        x = crandn(rng, 2, 3, 4)
        a = crandn(rng, 5, 3)
        b = crandn(rng, 2, 5)
        lhs = mode_n_product(mode_n_product(x, a, 1), b, 1)
        rhs = mode_n_product(x, b @ a, 1)
        npt.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_all_ones_collapse(self):
        x = np.ones((2, 2, 2), dtype=complex)
        out = mode_n_product(x, np.ones((1, 2)), 0)
        npt.assert_array_equal(out, 2 * np.ones((1, 2, 2)))

    def test_commutes_across_distinct_modes(self):
        rng = np.random.default_rng(10)
        x = crandn(rng, 2, 3, 4)
        a = crandn(rng, 2, 2)
        b = crandn(rng, 5, 4)
        lhs = mode_n_product(mode_n_product(x, a, 0), b, 2)
        rhs = mode_n_product(mode_n_product(x, b, 2), a, 0)
        npt.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_unfold_contract(self):
        rng = np.random.default_rng(11)
        x = crandn(rng, 2, 3, 4)
        a = crandn(rng, 5, 3)
        npt.assert_allclose(
            mode_n_unfold(mode_n_product(x, a, 1), 1),
            a @ mode_n_unfold(x, 1),
            rtol=1e-12,
            atol=1e-12,
        )


class TestMultimodeUnfold:
    def test_selection_pattern(self):
        x = np.zeros((2, 2, 2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                x[i, i, j, j] = 1.0
        m = multimode_unfold_12_34(x)
        expected = np.zeros((4, 4))
        for i in range(2):
            for j in range(2):
                expected[i + 2 * i, j + 2 * j] = 1.0
        npt.assert_array_equal(m, expected)

    def test_round_trip(self):
        rng = np.random.default_rng(12)
        x = crandn(rng, 2, 3, 4, 2)
        assert np.array_equal(multimode_fold_12_34(multimode_unfold_12_34(x), x.shape), x)

    def test_tucker_multimode_identity(self):
        # multimode(core x1 A1 x2 A2 x3 A3 x4 A4) = (A2 kron A1) multimode(core) (A4 kron A3)^T
        rng = np.random.default_rng(13)
        core = crandn(rng, 2, 2, 2, 2)
        factors = [crandn(rng, 2, 2) for _ in range(4)]
        x = core
        for mode, f in enumerate(factors):
            x = mode_n_product(x, f, mode)
        expected = (
            kronecker(factors[1], factors[0])
            @ multimode_unfold_12_34(core)
            @ kronecker(factors[3], factors[2]).T
        )
        npt.assert_allclose(multimode_unfold_12_34(x), expected, rtol=1e-12, atol=1e-12)

    def test_wrong_order_raises(self):
        with pytest.raises(ValueError):
            multimode_unfold_12_34(np.ones((2, 2, 2)))


class TestPseudoInverse:
    def test_identity(self):
        npt.assert_allclose(pseudo_inverse(np.eye(4)), np.eye(4), atol=1e-14)

    def test_orthonormal_rows(self):
        rng = np.random.default_rng(14)
        q, _ = np.linalg.qr(crandn(rng, 6, 3))
        a = q.conj().T  # 3x6 with orthonormal rows
        npt.assert_allclose(pseudo_inverse(a), a.conj().T, atol=1e-12)

    def test_moore_penrose_left_inverse(self):
        rng = np.random.default_rng(15)
        a = crandn(rng, 6, 3)
        npt.assert_allclose(pseudo_inverse(a) @ a, np.eye(3), atol=1e-10)

    def test_four_moore_penrose_conditions(self):
        rng = np.random.default_rng(16)
        a = crandn(rng, 5, 3) @ crandn(rng, 3, 7)  # rank 3, rectangular
        p = pseudo_inverse(a)
        npt.assert_allclose(a @ p @ a, a, atol=1e-10)
        npt.assert_allclose(p @ a @ p, p, atol=1e-10)
        npt.assert_allclose((a @ p).conj().T, a @ p, atol=1e-10)
        npt.assert_allclose((p @ a).conj().T, p @ a, atol=1e-10)

    def test_reconstruction_large(self):
        rng = np.random.default_rng(17)
        a = crandn(rng, 64, 256)
        p = pseudo_inverse(a)
        err = np.linalg.norm(a @ p @ a - a) / np.linalg.norm(a)
        assert err < 1e-9

    def test_rank_reporting(self):
        rng = np.random.default_rng(18)
        a = crandn(rng, 5, 2) @ crandn(rng, 2, 5)
        _, rank = pseudo_inverse(a, return_rank=True)
        assert rank == 2
        assert effective_rank(a) == 2
        assert effective_rank(np.zeros((3, 3))) == 0


class TestRankOneApprox:
    def test_exact_rank_one(self):
        rng = np.random.default_rng(19)
        a = crandn(rng, 4)
        b = crandn(rng, 3)
        m = np.outer(a, b)
        u, v = rank_one_approx(m)
        npt.assert_allclose(np.outer(u, v), m, rtol=1e-10, atol=1e-12)

    def test_diagonal(self):
        u, v = rank_one_approx(np.diag([3.0, 1.0]).astype(complex))
        npt.assert_allclose(np.outer(u, v), np.diag([3.0, 0.0]), atol=1e-12)

    def test_eckart_young_tail_energy(self):
        rng = np.random.default_rng(20)
        m = crandn(rng, 5, 4)
        u, v = rank_one_approx(m)
        s = np.linalg.svd(m, compute_uv=False)
        npt.assert_allclose(
            np.linalg.norm(m - np.outer(u, v)), np.sqrt(np.sum(s[1:] ** 2)), rtol=1e-10
        )

    def test_symmetric_split(self):
        rng = np.random.default_rng(21)
        m = crandn(rng, 4, 4)
        u, v = rank_one_approx(m)
        npt.assert_allclose(np.linalg.norm(u), np.linalg.norm(v), rtol=1e-12)

    def test_zero_matrix_raises(self):
        with pytest.raises(ValueError):
            rank_one_approx(np.zeros((3, 3), dtype=complex))


class TestAlgebraicIdentities:
    """Khatri-Rao / Kronecker / vec identities, as randomized property checks."""

    def rel_err(self, x, y):
        return np.linalg.norm(x - y) / np.linalg.norm(y)

    def test_mixed_product_khatri_rao(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            i, j, r, s = rng.integers(2, 9, size=4)
            a, b = crandn(rng, i, r), crandn(rng, j, r)
            c, d = crandn(rng, r, s), crandn(rng, r, s)
            lhs = khatri_rao_cols(a @ c, b @ d)
            rhs = kronecker(a, b) @ khatri_rao_cols(c, d)
            assert self.rel_err(lhs, rhs) < 1e-10

    def test_vec_of_triple_product(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            i, r, s = rng.integers(2, 9, size=3)
            a, b, c = crandn(rng, i, r), crandn(rng, r, r), crandn(rng, r, s)
            lhs = vec(a @ b @ c)
            rhs = kronecker(c.T, a) @ vec(b)
            assert self.rel_err(lhs, rhs) < 1e-10

    def test_vec_of_diagonal_sandwich(self):
        rng = np.random.default_rng(24)
        for _ in range(50):
            i, r, s = rng.integers(2, 9, size=3)
            a, c = crandn(rng, i, r), crandn(rng, r, s)
            d = crandn(rng, r)
            lhs = vec(a @ np.diag(d) @ c)
            rhs = khatri_rao_cols(c.T, a) @ d
            assert self.rel_err(lhs, rhs) < 1e-10

    def test_diag_swap_exact(self):
        rng = np.random.default_rng(25)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            a, b = crandn(rng, n), crandn(rng, n)
            assert np.array_equal(np.diag(a) @ b, np.diag(b) @ a)
