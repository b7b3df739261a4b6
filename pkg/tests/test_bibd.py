import numpy as np
import pytest
from scipy import linalg

from bjbd.bibd import (bi_block_diagonalize, block_factorize, conjugate, split_spectrum)
from bjbd.commutant import build_L, l_spectrum
from bjbd.core import Partition, block_diag_part, off_block_diag_part
from bjbd.exceptions import NoReliableSplitError, PreconditionError, SplitUnstableError
from bjbd.subspace import canonical_angles, orth

from conftest import planted_two_block
from oracles import dense_null_dim


class TestSplitSpectrum:
    def test_pm_one(self):
        r = split_spectrum([1, 1, -1, -1])
        assert r.sizes == (2, 2) and r.centers == (1.0, -1.0) and r.gap == 2.0

    def test_one_three(self):
        r = split_spectrum([np.sqrt(3)] + [-1 / np.sqrt(3)] * 3)
        assert r.sizes == (1, 3)

    def test_conjugate_pair_stays_together(self):
        r = split_spectrum([0.9 + 0.05j, 0.9 - 0.05j, -1.1])
        assert r.sizes == (2, 1)
        np.testing.assert_array_equal(r.upper, [True, True, False])

    def test_no_gap(self):
        with pytest.raises(NoReliableSplitError):
            split_spectrum([0.2, 0.1, -0.3])

    def test_single(self):
        with pytest.raises(NoReliableSplitError):
            split_spectrum([1.0])

    def test_from_matrix(self):
        assert split_spectrum(np.diag([2.0, -1.0, -1.0])).sizes == (1, 2)


class TestBlockFactorize:
    def test_already_block_diagonal(self):
        X = linalg.block_diag([[2.0, 0.3], [0.1, 1.5]], [[-1.0]])
        Y, G1, G2, _ = block_factorize(X, 0.0)
        np.testing.assert_allclose(Y @ linalg.block_diag(G1, G2) @ np.linalg.inv(Y), X, atol=1e-12)
        # Y is block diagonal up to a block factor
        assert np.abs(Y[:2, 2:]).max() <= 1e-12 and np.abs(Y[2:, :2]).max() <= 1e-12

    def test_invariant_subspaces(self, rng):
        S = rng.standard_normal((3, 3))
        X = S @ np.diag([1.0, 1.0, -1.0]) @ np.linalg.inv(S)
        Y, G1, G2, _ = block_factorize(X, 0.0)
        assert canonical_angles(orth(S[:, :2]), orth(Y[:, :2])).max() <= 1e-8
        assert canonical_angles(orth(S[:, 2:]), orth(Y[:, 2:])).max() <= 1e-8
        np.testing.assert_allclose(np.linalg.eigvals(G1), [1, 1], atol=1e-6)

    def test_conjugate_pair_kept(self):
        X = linalg.block_diag([[1.0, -2.0], [2.0, 1.0]], [[-3.0]])
        Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
        Y, G1, G2, _ = block_factorize(Q @ X @ Q.T, -1.0)
        assert G1.shape == (2, 2)
        np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(G1)), [1 - 2j, 1 + 2j])

    def test_empty_group(self):
        with pytest.raises(PreconditionError):
            block_factorize(np.eye(2), 5.0)

    def test_unstable(self):
        X = np.array([[1.0, 1.0], [0.0, 1.0 - 1e-12]])
        with pytest.raises(SplitUnstableError):
            block_factorize(X, 1.0 - 5e-13)


class TestBiBlockDiagonalize:
    @pytest.mark.parametrize("q1,q2", [(1, 1), (2, 2), (1, 3), (3, 5), (2, 4)])
    def test_noiseless_exact_split(self, q1, q2):
        D, _, _ = planted_two_block(q1, q2, seed=q1 + 7 * q2)
        r = bi_block_diagonalize(D, 0.0)
        assert r.is_split and sorted(r.partition.parts) == sorted((q1, q2))
        assert r.split_residual <= 1e-16 * np.sum(D.matrices ** 2) * 1e3
        np.testing.assert_allclose(r.Y.T @ r.Z, np.eye(q1 + q2), atol=1e-10)

    def test_irreducible_unsplit(self, rng):
        A = rng.standard_normal((3, 3, 3))
        D = A + A.transpose(0, 2, 1)
        assert dense_null_dim(build_L(D)) == 1
        r = bi_block_diagonalize(D, 0.0)
        assert not r.is_split and r.partition == Partition((3,))

    def test_scalar(self):
        assert not bi_block_diagonalize(np.ones((2, 1, 1)), 0.0).is_split

    @pytest.mark.parametrize("seed", range(20))
    def test_snr60_split(self, seed):
        sigma = 10 ** (-60 / 20)
        D, _, tau = planted_two_block(2, 3, seed=seed, sigma=sigma)
        s, _ = l_spectrum(D)
        delta = 1.5 * s[1]
        r = bi_block_diagonalize(D, delta)
        assert r.is_split and sorted(r.partition.parts) == [2, 3]
        # delta-diagonalizer inequality with the measured constant
        Phi = conjugate(D, r)
        change = np.linalg.norm(Phi - block_diag_part(Phi, r.partition), axis=(1, 2))
        assert np.all(change <= np.sqrt(r.split_residual) + 1e-15)
        # order delta^2, with the constant growing like cond(Y)^2
        assert r.split_residual <= (r.condition * delta) ** 2
        q1, q2 = r.partition.parts
        c1, c2 = r.cluster_centers
        assert abs(q1 * c1 + q2 * c2) <= 10 * delta * 5 + 1e-6
        assert abs(q1 * c1 ** 2 + q2 * c2 ** 2 - 5) <= 10 * delta * 5 + 1e-6

    def test_trace_identity_of_centers_noiseless(self):
        D, _, _ = planted_two_block(3, 5, seed=1)
        r = bi_block_diagonalize(D, 0.0)
        (q1, q2), (c1, c2) = r.partition.parts, r.cluster_centers
        assert q1 * c1 + q2 * c2 == pytest.approx(0, abs=1e-8)
        assert q1 * c1 ** 2 + q2 * c2 ** 2 == pytest.approx(8, rel=1e-8)

    def test_conjugate_is_block_diagonal(self):
        D, _, _ = planted_two_block(2, 2, seed=4)
        r = bi_block_diagonalize(D, 0.0)
        assert np.abs(off_block_diag_part(conjugate(D, r), r.partition)).max() <= 1e-9
