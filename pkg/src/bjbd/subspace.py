"""Rank and range-space estimation from the stacked matrix, plus canonical angles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import as_matrix_set, stack_underline
from .exceptions import PreconditionError, RankUndetectableError

DEFAULT_XI = 0.1


@dataclass
class SpectralProfile:
    """Full SVD of the stacked matrix ``[C_1^T; C_1; ...; C_m^T; C_m]``.

    Attributes
    ----------
    singular_values : ndarray, shape (d,)
        Nonincreasing singular values.
    right_vectors : ndarray, shape (d, d)
        Right singular vectors as columns.
    left_vectors : ndarray, shape (2md, d)
        Left singular vectors as columns.
    selected_rank : int or None
        Set by :func:`estimate_rank`.
    """

    singular_values: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    selected_rank: Optional[int] = None

    @property
    def d(self) -> int:
        return self.singular_values.size

    def noise_level(self, p: Optional[int] = None) -> float:
        """The ``(p+1)``-th singular value, zero when ``p == d``."""
        p = self.selected_rank if p is None else p
        if p is None:
            raise PreconditionError("rank not selected yet")
        return float(self.singular_values[p]) if p < self.d else 0.0


def spectral_profile(set_) -> SpectralProfile:
    C = stack_underline(as_matrix_set(set_))
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    return SpectralProfile(singular_values=s, right_vectors=Vt.T, left_vectors=U)


def estimate_rank(profile: SpectralProfile, xi: float = DEFAULT_XI,
                  allow_full_rank: bool = True) -> int:
    """Smallest ``p`` with ``phi_{p+1} < xi * phi_p`` (``phi_{d+1} = 0``).

    With ``allow_full_rank=False`` the trailing comparison against
    ``phi_{d+1} = 0`` is skipped, so a spectrum without an interior gap
    (pure noise, say) is reported as undetectable instead of ``p = d``.

    Raises
    ------
    RankUndetectableError
        If no index passes the gap test, for instance an all-zero spectrum.
    """
    if not 0 < xi < 1:
        raise PreconditionError(f"xi must lie in (0, 1), got {xi}")
    s = profile.singular_values
    ext = np.append(s, 0.0)
    last = s.size if allow_full_rank else s.size - 1
    for p in range(1, last + 1):
        if ext[p - 1] > 0 and ext[p] < xi * ext[p - 1]:
            profile.selected_rank = p
            return p
    raise RankUndetectableError(
        f"no singular value gap below ratio {xi}", spectrum=s.copy()
    )


def range_basis(profile: SpectralProfile, p: int) -> np.ndarray:
    if not 1 <= p <= profile.d:
        raise PreconditionError(f"rank {p} outside [1, {profile.d}]")
    return profile.right_vectors[:, :p].copy()


def _check_orthonormal(B, name):
    G = B.T @ B
    if np.max(np.abs(G - np.eye(G.shape[0]))) > 1e-8:
        raise PreconditionError(f"{name} does not have orthonormal columns")


def canonical_angles(X, Y) -> np.ndarray:
    """Canonical angles between ``range(X)`` and ``range(Y)``, largest first.

    Parameters
    ----------
    X : ndarray, shape (n, k)
    Y : ndarray, shape (n, l)
        Orthonormal bases with ``k >= l``.

    Returns
    -------
    ndarray, shape (l,)
        Nonincreasing. Angles with ``cos^2 >= 1/2`` come from the sines
        (singular values of ``Y - X X^T Y``), the rest from the cosines
        (singular values of ``Y^T X``); ``arccos`` alone loses all accuracy
        near zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[0] != Y.shape[0]:
        raise PreconditionError("bases live in different ambient dimensions")
    if X.shape[1] < Y.shape[1]:
        raise PreconditionError("expected dim(X) >= dim(Y)")
    _check_orthonormal(X, "X")
    _check_orthonormal(Y, "Y")
    l = Y.shape[1]
    cos = np.linalg.svd(Y.T @ X, compute_uv=False)[:l]
    cos = np.clip(np.pad(cos, (0, l - cos.size)), 0.0, 1.0)  # descending
    sin = np.linalg.svd(Y - X @ (X.T @ Y), compute_uv=False)
    sin = np.clip(np.sort(np.pad(sin, (0, l - sin.size))), 0.0, 1.0)  # ascending
    theta = np.where(cos ** 2 >= 0.5, np.arcsin(sin), np.arccos(cos))
    return np.sort(theta)[::-1]


def sin_theta_complement(X, Y) -> float:
    """``||X_c^T Y||_2`` with ``X_c`` an orthonormal basis of ``range(X)^perp``."""
    Q, _ = np.linalg.qr(np.asarray(X), mode="complete")
    Xc = Q[:, X.shape[1]:]
    if Xc.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(Xc.T @ Y, 2))


def orth(A) -> np.ndarray:
    """Orthonormal basis of ``range(A)`` for a full column rank ``A``."""
    Q, _ = np.linalg.qr(np.asarray(A, dtype=np.float64))
    return Q
