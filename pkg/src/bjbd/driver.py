"""Recursive solver: range estimation, projection, then repeated bi-splitting."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .bibd import BiSplit, bi_block_diagonalize
from .commutant import l_spectrum
from .core import (BlockDiagonalization, MatrixSet, Partition, as_matrix_set,
                   block_diag_part, normalize_blocks, offblock_residual, pinv)
from .exceptions import BJBDError, IllConditionedError, PreconditionError
from .subspace import DEFAULT_XI, estimate_rank, range_basis, spectral_profile
from .zeig import DEFAULT_RESTARTS

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
GAP_RATIO = 2.0
GAP_MARGIN = 1.25


@dataclass
class WorkState:
    partition: Partition
    done: list
    B: np.ndarray  # (m, p, p)
    A_hat: np.ndarray  # (d, p)
    history: list = field(default_factory=list)

    def block_slice(self, t: int) -> slice:
        return self.partition.slices()[t]


def project(set_, V1) -> MatrixSet:
    """``{V1^T C_i V1}``."""
    V1 = np.asarray(V1, dtype=np.float64)
    return MatrixSet(V1.T @ as_matrix_set(set_).matrices @ V1)


def select_work_block(state: WorkState):
    """Index of the largest unfinished block (smallest index on ties), or None."""
    best = None
    for t, (size, done) in enumerate(zip(state.partition.parts, state.done)):
        if not done and (best is None or size > state.partition.parts[best]):
            best = t
    return best


def apply_split(state: WorkState, t: int, split: BiSplit) -> WorkState:
    """Replace block ``t`` by the two blocks of ``split`` (or mark it done)."""
    if not split.is_split:
        done = list(state.done)
        done[t] = True
        return replace(state, done=done)
    if not np.isfinite(split.condition) or split.condition > MAX_CONDITION:
        raise IllConditionedError(f"split condition number {split.condition:.3e}", state=state)
    sl = state.block_slice(t)
    parts = list(state.partition.parts)
    parts[t:t + 1] = list(split.partition.parts)
    done = list(state.done)
    done[t:t + 1] = [False, False]
    B = state.B.copy()
    sub = split.Y.T @ B[:, sl, sl] @ split.Y
    q1 = split.partition.parts[0]
    discarded = float(np.sqrt(np.sum(sub[:, :q1, q1:] ** 2) + np.sum(sub[:, q1:, :q1] ** 2)))
    sub[:, :q1, q1:] = 0.0
    sub[:, q1:, :q1] = 0.0
    B[:, sl, sl] = sub
    A_hat = state.A_hat.copy()
    A_hat[:, sl] = A_hat[:, sl] @ split.Z
    # keep rows of A_hat^+ orthonormal per block so noise in B stays at the input scale
    M = pinv(A_hat)
    M = M @ M.T
    k = sl.start
    for n in split.partition.parts:
        r = slice(k, k + n)
        S = _sqrtm_spd(M[r, r])
        Sinv = np.linalg.inv(S)
        A_hat[:, r] = A_hat[:, r] @ S
        B[:, r, r] = Sinv @ B[:, r, r] @ Sinv.T
        k += n
    entry = {
        "block": t,
        "size": sl.stop - sl.start,
        "sizes": list(split.partition.parts),
        "split_residual": split.split_residual,
        "discarded_norm": discarded,
        "condition": split.condition,
        "eigenvalues": np.asarray(split.info.get("eigenvalues", [])),
    }
    return WorkState(Partition(tuple(parts)), done, B, A_hat, state.history + [entry])


def _sqrtm_spd(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.sqrt(w)) @ V.T


def noise_delta(noise_level: float, amplification: float, sigma_max_L: float,
                factor: float = 2.0) -> float:
    """``max(factor * noise * amplification, 1e-10 * sigma_max(L))``."""
    return max(factor * noise_level * amplification, 1e-10 * sigma_max_L)


def gap_delta(spectrum, min_ratio: float = GAP_RATIO, margin: float = None):
    """Null-space level from the largest jump in the small singular values of ``L``.

    Looks at ``sigma_{k+1} / sigma_k`` for ``2 <= k <= q`` (``sigma_1`` is the
    exact zero of the identity direction). Returns ``margin`` times the last
    value below the largest jump, or 0 when no jump reaches ``min_ratio``.
    """
    margin = GAP_MARGIN if margin is None else margin
    s = np.asarray(spectrum[0] if isinstance(spectrum, tuple) else spectrum)
    q = int(round(np.sqrt(s.size)))
    hi = min(q + 1, s.size)
    if hi < 3 or s[1] <= 0:
        return 0.0
    ratios = s[2:hi] / s[1:hi - 1]
    k = int(np.argmax(ratios))
    if ratios[k] < min_ratio:
        return 0.0
    return float(min(margin * s[k + 1], np.sqrt(s[k + 1] * s[k + 2])))


def _row_amplification(A_hat, sl):
    P = pinv(A_hat)
    return float(np.linalg.norm(P[sl], 2) ** 2)


def whitening_transform(set_):
    """``M^{-1/2}`` for the mean matrix ``M``, or None if the set is not covariance-like.

    Covariance-like means every matrix is symmetric and the mean is positive
    definite.
    """
    C = as_matrix_set(set_).matrices
    scale = np.abs(C).max()
    if scale == 0 or np.abs(C - C.transpose(0, 2, 1)).max() > 1e-12 * scale:
        return None
    M = C.mean(axis=0)
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if w[0] <= 1e-12 * w[-1]:
        return None
    return (V / np.sqrt(w)) @ V.T


def solve_bjbdp(set_, xi: float = DEFAULT_XI, delta: Union[str, float] = "auto", seed=0,
                restarts: int = DEFAULT_RESTARTS, rank=None,
                whiten: Union[str, bool] = "auto",
                allow_full_rank: bool = True) -> BlockDiagonalization:
    """Blind joint block diagonalization of ``set_``.

    Parameters
    ----------
    set_ : MatrixSet or array_like, shape (m, d, d)
    xi : float
        Gap ratio for rank detection.
    delta : "auto" or float
        Null-space level for every bi-split. ``"auto"`` ties it to the
        ``(p+1)``-th singular value of the stacked matrix, scaled by how much
        the current diagonalizer amplifies noise in each block.
    seed : int
        Seed for the restarts of the quartic solver.
    rank : int, optional
        Skip rank detection and use this ``p``.
    whiten : "auto" or bool
        Congruence by ``M^{-1/2}`` (``M`` the mean matrix) before solving.
        ``"auto"`` whitens covariance-like sets only. The returned
        diagonalizer always refers to the original coordinates.
    allow_full_rank : bool
        Passed to :func:`estimate_rank`; False rejects ``p = d``.

    Returns
    -------
    BlockDiagonalization
        ``info`` carries the spectrum, the deltas used, the split history and
        any per-block warnings.

    Raises
    ------
    RankUndetectableError
        If no singular value gap is found.
    """
    C_in = as_matrix_set(set_)
    W = whitening_transform(C_in) if whiten else None
    if whiten is True and W is None:
        raise PreconditionError("whitening needs symmetric matrices with a positive definite mean")
    C = C_in.congruence(W) if W is not None else C_in
    profile = spectral_profile(C)
    if rank is None:
        p = estimate_rank(profile, xi, allow_full_rank)
    else:
        p = int(rank)
        profile.selected_rank = p
    V1 = range_basis(profile, p)
    noise = profile.noise_level(p)
    B0 = project(C, V1)
    state = WorkState(Partition.single(p), [False], B0.matrices.copy(), V1.copy())
    warnings = []
    deltas = []
    base = 2.0 * noise
    if delta == "auto" and noise == 0.0:
        # p == d leaves no rank gap to read the noise from; use the jump in L instead
        base = gap_delta(l_spectrum(B0))
    for _ in range(2 * p):
        t = select_work_block(state)
        if t is None:
            break
        sl = state.block_slice(t)
        D = MatrixSet(state.B[:, sl, sl])
        try:
            spec = l_spectrum(D)
            if delta == "auto":
                d_t = noise_delta(base, _row_amplification(state.A_hat, sl), spec[0][-1],
                                  factor=1.0)
            else:
                d_t = float(delta)
            deltas.append(d_t)
            split = bi_block_diagonalize(D, d_t, restarts=restarts, seed=seed)
            if split.warning:
                warnings.append({"block": t, "size": D.d, "message": split.warning})
            elif not split.is_split and delta != "auto" and D.d > 1 and d_t < noise:
                warnings.append({"block": t, "size": D.d, "message":
                                 f"delta {d_t:.3g} is below the noise level {noise:.3g}; "
                                 "the block may be reducible"})
            state = apply_split(state, t, split)
        except BJBDError as exc:
            logger.warning("block %d (size %d) left unsplit: %s", t, D.d, exc)
            warnings.append({"block": t, "size": D.d, "message": str(exc)})
            done = list(state.done)
            done[t] = True
            state = replace(state, done=done)
    tau = state.partition
    A_hat = state.A_hat if W is None else np.linalg.solve(W, state.A_hat)
    A_hat = normalize_blocks(A_hat, tau)
    P = pinv(A_hat)
    sig = block_diag_part(P @ C_in.matrices @ P.T, tau)
    resid = offblock_residual(C_in, A_hat, tau)
    info = {
        "rank": p,
        "whitened": W is not None,
        "singular_values": profile.singular_values,
        "noise_level": noise,
        "deltas": deltas,
        "history": state.history,
        "warnings": warnings,
        "condition": float(np.linalg.cond(A_hat)),
    }
    return BlockDiagonalization(tau, A_hat, MatrixSet(sig), resid, info)
