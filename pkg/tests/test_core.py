import numpy as np
import pytest
from hypothesis import given, strategies as st

from bjbd.core import (MatrixSet, Partition, block_diag_part, block_gram_normalize,
                       normalize_blocks, off_block_diag_part, offblock_residual,
                       partitions_equivalent, pinv, stack_underline)
from bjbd.exceptions import DegenerateInputError, DimensionError
from bjbd.synth import gen_example1

partitions = st.lists(st.integers(1, 4), min_size=1, max_size=4).map(lambda x: Partition(tuple(x)))


class TestMatrixSet:
    def test_shape_checks(self):
        with pytest.raises(DimensionError):
            MatrixSet(np.zeros((2, 3, 4)))
        with pytest.raises(DimensionError):
            MatrixSet(np.zeros((0, 3, 3)))

    def test_single_matrix_promoted(self):
        assert MatrixSet(np.eye(3)).m == 1

    def test_read_only(self):
        S = MatrixSet(np.zeros((2, 2, 2)))
        with pytest.raises(ValueError):
            S.matrices[0, 0, 0] = 1.0

    def test_fro_norm_matches_stack(self, rng):
        S = MatrixSet(rng.standard_normal((3, 4, 4)))
        assert S.fro_norm() == pytest.approx(np.linalg.norm(stack_underline(S)))


class TestPartition:
    def test_parse(self):
        assert Partition.parse("2,3,3,4").parts == (2, 3, 3, 4)
        assert str(Partition.parse(" 1, 2")) == "1,2"

    @pytest.mark.parametrize("text", ["", "2,x", "2,0", "-1"])
    def test_parse_rejects(self, text):
        with pytest.raises(DimensionError):
            Partition.parse(text)

    def test_slices_and_mask(self):
        tau = Partition((2, 1))
        assert tau.slices() == [slice(0, 2), slice(2, 3)]
        assert tau.mask().sum() == 5


class TestStackUnderline:
    def test_identity(self):
        np.testing.assert_array_equal(stack_underline([np.eye(2)]), np.vstack([np.eye(2)] * 2))

    def test_nilpotent(self):
        D = np.array([[0.0, 1.0], [0.0, 0.0]])
        expect = np.array([[0, 0], [1, 0], [0, 1], [0, 0]], dtype=float)
        np.testing.assert_array_equal(stack_underline([D]), expect)

    def test_shape_and_rank(self, rng):
        C = rng.standard_normal((10, 15, 15))
        S = stack_underline(C)
        assert S.shape == (300, 15)
        assert np.linalg.matrix_rank(S) == np.linalg.matrix_rank(np.vstack(list(C) + [c.T for c in C]))

    def test_planted_rank_equals_p(self):
        inst = gen_example1(snr_db=np.inf, seed=4)
        s = np.linalg.svd(stack_underline(inst.observed), compute_uv=False)
        assert int(np.sum(s > 1e-10 * s[0])) == inst.partition.total


class TestBlockParts:
    def test_single_block(self, rng):
        X = rng.standard_normal((4, 4))
        np.testing.assert_array_equal(block_diag_part(X, Partition((4,))), X)
        assert not off_block_diag_part(X, Partition((4,))).any()

    def test_scalar_blocks(self, rng):
        X = rng.standard_normal((3, 3))
        np.testing.assert_array_equal(block_diag_part(X, Partition((1, 1, 1))), np.diag(np.diag(X)))

    def test_ones_count(self):
        off = off_block_diag_part(np.ones((3, 3)), Partition((2, 1)))
        assert np.count_nonzero(off) == 4 and set(off[off != 0]) == {1.0}

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            block_diag_part(np.eye(3), Partition((2, 2)))

    @given(partitions, st.integers(0, 2**31))
    def test_projector_properties(self, tau, seed):
        X = np.random.default_rng(seed).standard_normal((tau.total, tau.total))
        B = block_diag_part(X, tau)
        np.testing.assert_array_equal(block_diag_part(B, tau), B)
        np.testing.assert_allclose(B + off_block_diag_part(X, tau), X)
        assert np.linalg.norm(X) ** 2 == pytest.approx(
            np.linalg.norm(B) ** 2 + np.linalg.norm(off_block_diag_part(X, tau)) ** 2)


class TestPartitionsEquivalent:
    def test_reordering(self):
        ok, perm = partitions_equivalent(Partition((3, 1, 5, 2)), Partition((1, 5, 2, 3)))
        assert ok and perm == (3, 0, 1, 2)

    def test_cardinality(self):
        assert partitions_equivalent(Partition((2, 2)), Partition((4,))) == (False, None)

    def test_multiset(self):
        assert partitions_equivalent(Partition((2, 3, 3, 4)), Partition((3, 4, 2, 3)))[0]

    @given(partitions, st.randoms(use_true_random=False))
    def test_shuffle_witness(self, tau, r):
        parts = list(tau.parts)
        r.shuffle(parts)
        other = Partition(tuple(parts))
        ok, perm = partitions_equivalent(tau, other)
        assert ok
        assert all(other.parts[perm[j]] == tau.parts[j] for j in range(len(tau)))


class TestPinvAndNormalization:
    def test_pinv_matches_numpy(self, rng):
        A = rng.standard_normal((7, 4))
        np.testing.assert_allclose(pinv(A), np.linalg.pinv(A), atol=1e-12)

    def test_normalize_requires_full_rank(self):
        A = np.ones((4, 2))
        with pytest.raises(DegenerateInputError):
            normalize_blocks(A, Partition((1, 1)))

    def test_normalized_blocks_are_orthonormal(self, rng):
        tau = Partition((2, 3))
        P = pinv(normalize_blocks(rng.standard_normal((8, 5)), tau))
        M = P @ P.T
        for sl in tau.slices():
            np.testing.assert_allclose(M[sl, sl], np.eye(sl.stop - sl.start), atol=1e-10)

    def test_block_gram_normalize(self, rng):
        tau = Partition((2, 1, 2))
        A = block_gram_normalize(rng.standard_normal((6, 5)), tau)
        G = A.T @ A
        np.testing.assert_allclose(block_diag_part(G, tau), np.eye(5), atol=1e-12)


class TestOffblockResidual:
    def test_exact_factorization(self):
        inst = gen_example1(snr_db=np.inf, seed=2)
        f = offblock_residual(inst.observed, inst.truth_A, inst.partition)
        assert f <= 1e-10 * inst.observed.fro_norm()

    def test_diagonal_set(self, rng):
        C = np.array([np.diag(rng.standard_normal(4)) for _ in range(3)])
        assert offblock_residual(C, np.eye(4), Partition((1,) * 4)) == pytest.approx(0, abs=1e-14)

    @given(st.integers(0, 2**31))
    def test_block_change_and_permutation_invariance(self, seed):
        inst = gen_example1(snr_db=40, seed=seed % 1000)
        tau = inst.partition
        rng = np.random.default_rng(seed)
        base = offblock_residual(inst.observed, inst.truth_A, tau)
        D = np.zeros((tau.total, tau.total))
        for sl in tau.slices():
            k = sl.stop - sl.start
            D[sl, sl] = rng.standard_normal((k, k)) + 3 * np.eye(k)
        f = offblock_residual(inst.observed, inst.truth_A @ D, tau)
        assert f == pytest.approx(base, rel=1e-8)
        order = [3, 0, 2, 1]
        cols = np.concatenate([np.arange(tau.total)[tau.slices()[j]] for j in order])
        tau_p = Partition(tuple(tau.parts[j] for j in order))
        assert offblock_residual(inst.observed, inst.truth_A[:, cols], tau_p) == \
            pytest.approx(base, rel=1e-8)
