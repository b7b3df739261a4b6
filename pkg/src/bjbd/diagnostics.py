"""Uniqueness and identifiability checks for a block diagonalization.

For a solution with blocks ``Sigma_i^(jj)`` two families of linear operators
decide uniqueness: ``G_jj`` (can block ``j`` be split further?) and ``G_jk``
(can blocks ``j`` and ``k`` be mixed?). Their smallest relevant singular
values are the moduli of irreducibility and nonequivalence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .commutant import build_L
from .core import (MatrixSet, Partition, as_matrix_set, block_gram_normalize,
                   partitions_equivalent, pinv, stack_underline)
from .exceptions import DimensionError

RANK_TOL = 1e-10


def build_Gjj(blocks) -> np.ndarray:
    """``G_jj`` for one block family: rows ``I kron S_i - (S_i^T kron I) Pi``."""
    return build_L(blocks)


def build_Gjk(blocks_j, blocks_k) -> np.ndarray:
    """``G_jk`` acting on ``[vec(Gamma_jk); -vec(Gamma_kj^T)]``.

    Per matrix index ``i`` the two row blocks are
    ``[I kron S_j, S_k^T kron I]`` and ``[I kron S_j^T, S_k kron I]``.
    """
    Sj = as_matrix_set(blocks_j)
    Sk = as_matrix_set(blocks_k)
    if Sj.m != Sk.m:
        raise DimensionError("block families must have the same number of matrices")
    pj, pk = Sj.d, Sk.d
    Ij, Ik = np.eye(pj), np.eye(pk)
    rows = []
    for A, B in zip(Sj, Sk):
        rows.append(np.hstack([np.kron(Ik, A), np.kron(B.T, Ij)]))
        rows.append(np.hstack([np.kron(Ik, A.T), np.kron(B, Ij)]))
    return np.vstack(rows)


@dataclass
class IdentifiabilityReport:
    omega_ir: float
    omega_neq: float
    p1_holds: bool
    p2_holds: bool
    p1_offending_block: Optional[int] = None
    p2_offending_pair: Optional[tuple] = None
    epsilon: Optional[float] = None
    r: Optional[float] = None
    g1: Optional[float] = None
    g2: Optional[float] = None
    constants: dict = field(default_factory=dict)
    missing: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def unique(self) -> bool:
        return self.p1_holds and self.p2_holds

    def to_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            return "inf" if math.isinf(x) else float(x)

        return {
            "omega_ir": num(self.omega_ir),
            "omega_neq": num(self.omega_neq),
            "p1_holds": self.p1_holds,
            "p2_holds": self.p2_holds,
            "p1_offending_block": self.p1_offending_block,
            "p2_offending_pair": list(self.p2_offending_pair) if self.p2_offending_pair else None,
            "unique": self.unique,
            "epsilon": num(self.epsilon),
            "r": num(self.r),
            "g1": num(self.g1),
            "g2": num(self.g2),
            "constants": self.constants,
            "missing": self.missing,
        }


def split_blocks(sigma, tau: Partition) -> list:
    """Per-block families ``[{Sigma_i^(jj)}_i for j]`` from full ``p x p`` matrices."""
    S = as_matrix_set(sigma)
    if S.d != tau.total:
        raise DimensionError(f"matrices are {S.d}x{S.d} but the partition sums to {tau.total}")
    return [MatrixSet(S.matrices[:, sl, sl]) for sl in tau.slices()]


def identifiability(blocks, tau: Partition, A=None, observed=None, C_const: float = 1.0,
                    kappa_const: float = 1.0, ell_hat: Optional[int] = None,
                    rank_tol: float = RANK_TOL) -> IdentifiabilityReport:
    """Moduli, uniqueness conditions and perturbation-bound quantities.

    Parameters
    ----------
    blocks : list of MatrixSet or MatrixSet
        One family per block, or the full ``p x p`` block-diagonal matrices.
    tau : Partition
    A : ndarray, optional
        Diagonalizer. Its column blocks are orthonormalized first and the
        blocks transformed to match, so the moduli refer to the normalized
        solution.
    observed : MatrixSet, optional
        Noisy set; together with ``A`` it gives ``epsilon``, ``r``, ``g1``, ``g2``.
    C_const, kappa_const : float
        Unquantified constants of the bound, exposed as parameters.
    ell_hat : int, optional
        Number of detected blocks; defaults to the number of blocks in ``tau``.
    """
    tau = tau if isinstance(tau, Partition) else Partition(tuple(tau))
    fams = split_blocks(blocks, tau) if isinstance(blocks, (MatrixSet, np.ndarray)) else \
        [as_matrix_set(b) for b in blocks]
    if [f.d for f in fams] != list(tau.parts):
        raise DimensionError("block sizes do not match the partition")
    if A is not None:
        A = np.asarray(A, dtype=np.float64)
        if A.shape[1] != tau.total:
            raise DimensionError("diagonalizer columns do not match the partition")
        An = block_gram_normalize(A, tau)
        fams = [_transform_family(f, A[:, sl], An[:, sl]) for f, sl in zip(fams, tau.slices())]
        A = An

    omega_ir, p1, bad_block, null_dims = math.inf, True, None, []
    for j, fam in enumerate(fams):
        if fam.d == 1:
            null_dims.append(1)
            continue
        s = np.linalg.svd(build_Gjj(fam), compute_uv=False)
        thr = rank_tol * s[0] if s[0] > 0 else 0.0
        nonzero = s[s > thr]
        null_dims.append(int(fam.d ** 2 - nonzero.size))
        if nonzero.size:
            omega_ir = min(omega_ir, float(nonzero[-1]))
        if null_dims[-1] != 1 and p1:
            p1, bad_block = False, j

    omega_neq, p2, bad_pair, sig_min = math.inf, True, None, {}
    for j in range(len(fams)):
        for k in range(j + 1, len(fams)):
            s = np.linalg.svd(build_Gjk(fams[j], fams[k]), compute_uv=False)
            smin = float(s[-1])
            sig_min[f"{j},{k}"] = smin
            omega_neq = min(omega_neq, smin)
            if smin <= rank_tol * s[0] and p2:
                p2, bad_pair = False, (j, k)

    rep = IdentifiabilityReport(
        omega_ir=omega_ir, omega_neq=omega_neq, p1_holds=p1, p2_holds=p2,
        p1_offending_block=bad_block, p2_offending_pair=bad_pair,
        constants={"C": C_const, "kappa": kappa_const, "note": "illustrative"},
        details={"null_dims": null_dims, "sigma_min_Gjk": sig_min},
    )
    if A is None or observed is None:
        rep.missing = [n for n, v in (("A", A), ("observed", observed)) if v is None]
        return rep

    obs = as_matrix_set(observed)
    clean = np.zeros((obs.m, tau.total, tau.total))
    for fam, sl in zip(fams, tau.slices()):
        clean[:, sl, sl] = fam.matrices
    E = obs.matrices - A @ clean @ A.T
    phi = np.linalg.svd(stack_underline(obs), compute_uv=False)
    phi_p = float(phi[tau.total - 1])
    eps = float(np.linalg.norm(stack_underline(E), 2)) / phi_p
    smin_A = float(np.linalg.svd(A, compute_uv=False)[-1])
    d = obs.d
    r = math.sqrt(2 * (d + 2 * C_const)) * phi_p * eps / (smin_A ** 2 * (1 - eps ** 2)) \
        if eps < 1 else math.inf
    ell = tau.cardinality if ell_hat is None else int(ell_hat)
    coupling = max(kappa_const / omega_neq if omega_neq > 0 else math.inf,
                   1.0 / omega_ir if omega_ir > 0 else math.inf)

    def g(j):
        lead = math.inf if ell <= 1 else math.sqrt(2 * j) / ((ell - 1) * kappa_const
                                                            * math.sqrt(tau.total))
        pen = coupling * r if r > 0 else 0.0
        return lead - pen

    rep.epsilon, rep.r, rep.g1, rep.g2 = eps, r, g(1), g(2)
    return rep


def _transform_family(fam: MatrixSet, Aj, Aj_new) -> MatrixSet:
    # Aj_new = Aj R  =>  Sigma_new = R^{-1} Sigma R^{-T}
    R = np.linalg.lstsq(Aj, Aj_new, rcond=None)[0]
    Rinv = np.linalg.inv(R)
    return MatrixSet(Rinv @ fam.matrices @ Rinv.T)


@dataclass
class Comparison:
    equivalent: bool
    permutation: Optional[tuple]
    block_error: float
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "equivalent": self.equivalent,
            "permutation": list(self.permutation) if self.permutation is not None else None,
            "block_error": self.block_error,
            **self.info,
        }


def compare_solutions(truth, candidate, tol: float = 1e-6) -> Comparison:
    """Compare ``(tau, A)`` with ``(tau_hat, A_hat)`` up to block scaling and order.

    Both diagonalizers are block-orthonormalized first so the error does not
    depend on how each solution scales its blocks. Candidate blocks are then
    matched greedily to truth blocks by the mass of ``A^+ A_hat`` in the
    corresponding sub-block, a block transform ``D_j`` is fitted by least
    squares, and the relative misfit is reported.

    ``permutation[j]`` is the candidate block matched with truth block ``j``.
    """
    tau, A = truth
    tau_h, A_h = candidate
    tau = tau if isinstance(tau, Partition) else Partition(tuple(tau))
    tau_h = tau_h if isinstance(tau_h, Partition) else Partition(tuple(tau_h))
    if tau.total != tau_h.total:
        return Comparison(False, None, math.inf, {"reason": "partitions have different totals"})
    A = block_gram_normalize(np.asarray(A, dtype=np.float64), tau)
    A_h = block_gram_normalize(np.asarray(A_h, dtype=np.float64), tau_h)
    if A.shape[0] != A_h.shape[0]:
        return Comparison(False, None, math.inf, {"reason": "diagonalizers have different rows"})
    T = np.abs(pinv(A) @ A_h)
    sj, sk = tau.slices(), tau_h.slices()
    mass = np.array([[np.linalg.norm(T[a, b]) for b in sk] for a in sj])
    pairs = sorted(((mass[j, k], j, k) for j in range(len(sj)) for k in range(len(sk))
                    if tau.parts[j] == tau_h.parts[k]), key=lambda t: (-t[0], t[1], t[2]))
    perm = [None] * len(sj)
    used = set()
    for _, j, k in pairs:
        if perm[j] is None and k not in used:
            perm[j] = k
            used.add(k)
    same, _ = partitions_equivalent(tau, tau_h)
    if any(k is None for k in perm):
        return Comparison(False, None, math.inf,
                          {"reason": "no size-compatible block matching", "mass": mass.tolist()})
    err2 = 0.0
    for j, k in enumerate(perm):
        Aj, Ak = A[:, sj[j]], A_h[:, sk[k]]
        D = np.linalg.lstsq(Aj, Ak, rcond=None)[0]
        err2 += float(np.sum((Ak - Aj @ D) ** 2))
    err = math.sqrt(err2) / float(np.linalg.norm(A))
    return Comparison(bool(same and err <= tol), tuple(perm), err, {"tol": tol})
