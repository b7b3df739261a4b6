"""Split a matrix set into two jointly decoupled blocks, or declare it irreducible."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from .core import MatrixSet, Partition, as_matrix_set, off_block_diag_part
from .exceptions import NoReliableSplitError, PreconditionError, SplitUnstableError
from .zeig import DEFAULT_RESTARTS, solve_opt

logger = logging.getLogger(__name__)

TOLERANCE_GAP = 1.0
SEP_TOL = 1e-10


@dataclass
class BiSplit:
    """Outcome of one bi-block diagonalization.

    ``Z`` satisfies ``D_i ~= Z Phi_i Z^T`` with ``Phi_i`` block diagonal for
    ``partition``; ``Y = Z^{-T}`` is kept as well so callers never invert.
    """

    partition: Partition
    Z: np.ndarray
    Y: np.ndarray
    cluster_centers: Optional[tuple] = None
    split_residual: float = 0.0
    condition: float = 1.0
    warning: Optional[str] = None
    info: dict = field(default_factory=dict)

    @property
    def is_split(self) -> bool:
        return self.partition.cardinality == 2


class SpectrumSplit(NamedTuple):
    upper: np.ndarray  # mask of the eigenvalues above the cut
    sizes: tuple  # (q1, q2): counts above and below
    centers: tuple  # mean real part per group
    gap: float
    cut: float


def split_spectrum(eigenvalues, tolerance_gap: float = TOLERANCE_GAP) -> SpectrumSplit:
    """Cut the spectrum at the largest gap between sorted real parts.

    Conjugate pairs share a real part and so always land on the same side.

    Raises
    ------
    NoReliableSplitError
        If the largest gap is below ``tolerance_gap``.
    """
    lam = np.asarray(eigenvalues)
    if lam.ndim == 2:
        lam = np.linalg.eigvals(lam)
    re = np.real(lam)
    if re.size < 2:
        raise NoReliableSplitError("a single eigenvalue cannot be split")
    order = np.sort(re)
    gaps = np.diff(order)
    k = int(np.argmax(gaps))
    gap = float(gaps[k])
    if gap < tolerance_gap:
        raise NoReliableSplitError(f"largest real-part gap {gap:.3g} < {tolerance_gap}")
    cut = 0.5 * (order[k] + order[k + 1])
    upper = re > cut
    centers = (float(re[upper].mean()), float(re[~upper].mean()))
    return SpectrumSplit(upper, (int(upper.sum()), int((~upper).sum())), centers, gap, cut)


def block_factorize(X, cut: float):
    """Real factorization ``X = Y diag(G1, G2) Y^{-1}``.

    ``G1`` carries the eigenvalues with real part above ``cut``. The real
    Schur form is reordered so those come first, then the coupling block is
    removed by solving ``T11 R - R T22 = -T12``.

    Returns
    -------
    Y, G1, G2 : ndarray
    sep : float
        Smallest singular value of the Sylvester operator.
    """
    X = np.asarray(X, dtype=np.float64)
    q = X.shape[0]
    T, Q, k = linalg.schur(X, output="real", sort=lambda re, im: re > cut)
    if k == 0 or k == q:
        raise PreconditionError("both eigenvalue groups must be nonempty")
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    S = np.kron(np.eye(q - k), T11) - np.kron(T22.T, np.eye(k))
    sep = float(np.linalg.svd(S, compute_uv=False)[-1])
    if sep < SEP_TOL:
        raise SplitUnstableError(f"sep(G1, G2) = {sep:.3e}")
    R = linalg.solve_sylvester(T11, -T22, -T12)
    W = np.eye(q)
    W[:k, k:] = R
    return Q @ W, T11.copy(), T22.copy(), sep


def bi_block_diagonalize(set_, delta: float, restarts: int = DEFAULT_RESTARTS, seed=0,
                         tolerance_gap: float = TOLERANCE_GAP) -> BiSplit:
    """Approximate bi-block diagonalization of ``set_`` at null-space level ``delta``.

    A failed cluster test or an unstable Sylvester solve does not raise;
    the set is returned unsplit with ``warning`` set.
    """
    D = as_matrix_set(set_)
    q = D.d
    unsplit = BiSplit(Partition.single(q), np.eye(q), np.eye(q))
    if q == 1:
        return unsplit
    sol = solve_opt(D, delta, restarts=restarts, seed=seed)
    unsplit.info = {"opt": sol.info}
    if not sol.feasible:
        return unsplit
    try:
        cl = split_spectrum(sol.eigenvalues, tolerance_gap)
        Y, G1, G2, sep = block_factorize(sol.X_star, cl.cut)
    except (NoReliableSplitError, SplitUnstableError) as exc:
        logger.warning("block of size %d left unsplit: %s", q, exc)
        unsplit.warning = str(exc)
        unsplit.info["eigenvalues"] = sol.eigenvalues
        return unsplit
    tau = Partition(cl.sizes)
    Phi = Y.T @ D.matrices @ Y
    resid = float(np.sum(off_block_diag_part(Phi, tau) ** 2))
    info = {
        "opt": sol.info,
        "eigenvalues": sol.eigenvalues,
        "gap": cl.gap,
        "sep": sep,
        "factor_error": float(np.linalg.norm(sol.X_star - Y @ linalg.block_diag(G1, G2)
                                             @ np.linalg.inv(Y)) / np.linalg.norm(sol.X_star)),
    }
    if delta > 0:
        info["residual_constant"] = resid / max(delta, sol.info["delta"]) ** 2
    return BiSplit(tau, np.linalg.inv(Y).T, Y, cl.centers, resid, float(np.linalg.cond(Y)),
                   None, info)


def conjugate(set_: MatrixSet, split: BiSplit) -> np.ndarray:
    """``Z^{-1} D_i Z^{-T}`` for every matrix in the set."""
    return split.Y.T @ as_matrix_set(set_).matrices @ split.Y
