import numpy as np
import pytest

from bjbd.bibd import BiSplit
from bjbd.core import MatrixSet, Partition, off_block_diag_part, partitions_equivalent, pinv
from bjbd.diagnostics import compare_solutions
from bjbd.driver import (WorkState, apply_split, gap_delta, noise_delta, project,
                         select_work_block, solve_bjbdp, whitening_transform)
from bjbd.exceptions import IllConditionedError, PreconditionError
from bjbd.synth import gen_example1, gen_isa_covariances, random_block_diagonal, rng_for


def state(parts, done):
    p = sum(parts)
    return WorkState(Partition(tuple(parts)), list(done), np.zeros((1, p, p)), np.eye(p))


class TestProject:
    def test_identity(self, rng):
        C = rng.standard_normal((2, 3, 3))
        np.testing.assert_array_equal(project(C, np.eye(3)).matrices, C)

    def test_rank_one(self, rng):
        v = np.array([[1.0], [0.0], [0.0]])
        assert project(rng.standard_normal((2, 3, 3)), v).d == 1

    def test_noiseless_congruence(self):
        inst = gen_example1(snr_db=np.inf, seed=0)
        from bjbd.subspace import range_basis, spectral_profile
        V = range_basis(spectral_profile(inst.observed), 12)
        Z = V.T @ inst.truth_A
        np.testing.assert_allclose(project(inst.observed, V).matrices,
                                   Z @ inst.truth_blocks.matrices @ Z.T, atol=1e-9)


class TestSelectWorkBlock:
    def test_largest(self):
        assert select_work_block(state((2, 3, 3, 4), (0, 0, 0, 0))) == 3

    def test_skips_done(self):
        assert select_work_block(state((3, 3), (1, 0))) == 1

    def test_tie(self):
        assert select_work_block(state((2, 2), (0, 0))) == 0

    def test_all_done(self):
        assert select_work_block(state((1, 2), (1, 1))) is None


class TestApplySplit:
    def test_unsplit_marks_done(self):
        s = apply_split(state((4,), (0,)), 0, BiSplit(Partition((4,)), np.eye(4), np.eye(4)))
        assert s.done == [True] and select_work_block(s) is None

    def test_bookkeeping(self):
        st = state((2, 3, 3, 4), (0, 0, 0, 0))
        sp = BiSplit(Partition((2, 2)), np.eye(4), np.eye(4))
        out = apply_split(st, 3, sp)
        assert out.partition.parts == (2, 3, 3, 2, 2)
        assert out.done == [False] * 5
        assert len(out.history) == 1 and out.history[0]["sizes"] == [2, 2]

    def test_ill_conditioned(self):
        Y = np.diag([1.0, 1e-13])
        sp = BiSplit(Partition((1, 1)), np.linalg.inv(Y).T, Y, condition=1e13)
        with pytest.raises(IllConditionedError):
            apply_split(state((2,), (0,)), 0, sp)

    def test_zeroes_coupling_and_logs(self, rng):
        st = WorkState(Partition((2,)), [False], rng.standard_normal((3, 2, 2)), np.eye(2))
        sp = BiSplit(Partition((1, 1)), np.eye(2), np.eye(2))
        out = apply_split(st, 0, sp)
        assert not off_block_diag_part(out.B, out.partition).any()
        expect = np.sqrt(np.sum(st.B[:, 0, 1] ** 2 + st.B[:, 1, 0] ** 2))
        assert out.history[0]["discarded_norm"] == pytest.approx(expect)

    def test_rows_of_pinv_orthonormal_per_block(self, rng):
        st = WorkState(Partition((3,)), [False], rng.standard_normal((2, 3, 3)),
                       rng.standard_normal((5, 3)))
        Y = rng.standard_normal((3, 3))
        out = apply_split(st, 0, BiSplit(Partition((1, 2)), np.linalg.inv(Y).T, Y))
        P = pinv(out.A_hat)
        M = P @ P.T
        for sl in out.partition.slices():
            np.testing.assert_allclose(M[sl, sl], np.eye(sl.stop - sl.start), atol=1e-10)


class TestDeltaPolicy:
    def test_noise_delta_floor(self):
        assert noise_delta(0.0, 1.0, 100.0) == 1e-8
        assert noise_delta(0.1, 2.0, 1.0) == pytest.approx(0.4)

    def test_gap_delta(self):
        s = np.array([0.0, 0.1, 0.11, 5.0, 6.0, 7.0, 8, 9, 10])
        assert gap_delta(s) == pytest.approx(min(1.25 * 0.11, np.sqrt(0.11 * 5.0)))

    def test_gap_delta_no_jump(self):
        assert gap_delta(np.array([0.0, 1.0, 1.1, 1.2])) == 0.0


class TestWhitening:
    def test_nonsymmetric_skipped(self, rng):
        assert whitening_transform(rng.standard_normal((3, 4, 4))) is None

    def test_symmetric_pd(self, rng):
        A = rng.standard_normal((3, 4, 4))
        C = A @ A.transpose(0, 2, 1) + np.eye(4)
        W = whitening_transform(C)
        np.testing.assert_allclose(W @ C.mean(0) @ W, np.eye(4), atol=1e-12)

    def test_forced_on_invalid(self, rng):
        with pytest.raises(PreconditionError):
            solve_bjbdp(rng.standard_normal((3, 4, 4)), whiten=True)


class TestSolve:
    @pytest.mark.parametrize("seed", range(5))
    def test_example1_noiseless(self, seed):
        inst = gen_example1(snr_db=np.inf, seed=seed)
        sol = solve_bjbdp(inst.observed)
        assert partitions_equivalent(sol.partition, inst.partition)[0]
        assert sol.residual <= 1e-8 * inst.observed.fro_norm()
        assert compare_solutions((inst.partition, inst.truth_A),
                                 (sol.partition, sol.diagonalizer)).block_error <= 1e-6
        assert np.isfinite(sol.info["condition"])
        # final blocks are exactly block diagonal
        assert not off_block_diag_part(sol.blocks.matrices, sol.partition).any()
        assert len(sol.info["history"]) <= 2 * 12 - 1

    def test_identity_mixing(self):
        rng = rng_for(3)
        tau = Partition((2, 3, 1))
        C = random_block_diagonal(rng, tau, 6)
        sol = solve_bjbdp(C)
        assert partitions_equivalent(sol.partition, tau)[0]
        cmp = compare_solutions((tau, np.eye(6)), (sol.partition, sol.diagonalizer))
        assert cmp.equivalent

    def test_single_irreducible_block(self, rng):
        sol = solve_bjbdp(rng.standard_normal((4, 5, 5)))
        assert sol.partition == Partition((5,))

    def test_single_isa_group(self):
        inst = gen_isa_covariances((4,), d=4, m=8, seed=1)
        assert solve_bjbdp(inst.observed).partition == Partition((4,))

    def test_explicit_zero_delta_warns(self):
        inst = gen_example1(snr_db=40, seed=2)
        sol = solve_bjbdp(inst.observed, delta=0.0)
        assert sol.partition == Partition((12,))
        assert any("noise level" in w["message"] for w in sol.info["warnings"])

    def test_rank_override(self):
        inst = gen_example1(snr_db=np.inf, seed=1)
        assert solve_bjbdp(inst.observed, rank=12).rank == 12

    def test_deterministic(self):
        inst = gen_example1(snr_db=60, seed=8)
        a, b = solve_bjbdp(inst.observed, seed=3), solve_bjbdp(inst.observed, seed=3)
        np.testing.assert_array_equal(a.diagonalizer, b.diagonalizer)

    def test_whitening_maps_back(self):
        inst = gen_isa_covariances((2, 3), d=5, m=8, seed=4)
        sol = solve_bjbdp(inst.observed)
        assert sol.info["whitened"]
        assert partitions_equivalent(sol.partition, inst.partition)[0]
        P = pinv(sol.diagonalizer)
        np.testing.assert_allclose(sol.blocks.matrices,
                                   np.where(sol.partition.mask(), P @ inst.observed.matrices @ P.T,
                                            0), atol=1e-10)
