"""The operator ``L(D): vec(X) -> [vec(D_i X - X^T D_i)]_i`` and its relaxed null space.

``vec`` is column-major throughout, matching the Kronecker identities
``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import as_matrix_set
from .exceptions import AmbiguousThresholdError, PreconditionError


def vec(X) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, q) -> np.ndarray:
    return np.asarray(v).reshape(q, q, order="F")


def perfect_shuffle(q: int) -> np.ndarray:
    """Permutation ``P`` with ``P @ vec(X.T) == vec(X)`` for every ``q x q`` X."""
    if q < 1:
        raise PreconditionError("q must be positive")
    idx = np.arange(q * q).reshape(q, q).T.reshape(-1)
    P = np.zeros((q * q, q * q))
    P[np.arange(q * q), idx] = 1.0
    return P


def build_L(set_) -> np.ndarray:
    """Dense ``mq^2 x q^2`` matrix with blocks ``I kron D_i - (D_i^T kron I) P``."""
    D = as_matrix_set(set_)
    q = D.d
    I = np.eye(q)
    P = perfect_shuffle(q)
    return np.vstack([np.kron(I, Di) - np.kron(Di.T, I) @ P for Di in D])


@dataclass
class NullBasis:
    """Orthonormal (trace inner product) basis of the relaxed null space.

    ``sigma_kept`` are the singular values of ``L`` belonging to the basis,
    ``sigma_next`` the first one above ``delta`` (``inf`` if none).
    """

    basis: list
    sigma_kept: np.ndarray
    sigma_next: float
    delta: float
    spectrum: np.ndarray = field(default=None, repr=False)

    @property
    def s(self) -> int:
        return len(self.basis)

    @property
    def q(self) -> int:
        return self.basis[0].shape[0] if self.basis else 0

    def as_vectors(self) -> np.ndarray:
        """Columns ``vec(X_j)``, shape ``(q^2, s)``."""
        return np.column_stack([vec(X) for X in self.basis])


def l_spectrum(set_):
    """Ascending singular values and matching right singular vectors of ``L``."""
    L = build_L(set_)
    _, s, Vt = np.linalg.svd(L, full_matrices=False)
    return s[::-1].copy(), Vt[::-1].T.copy()


def zero_floor(q: int, sigma_max: float) -> float:
    """Level below which a singular value of ``L`` counts as an exact zero."""
    return 10.0 * q * np.finfo(float).eps * sigma_max


def null_basis(set_, delta: float, spectrum=None) -> NullBasis:
    """Right singular subspace of ``L`` for singular values ``<= delta``.

    Parameters
    ----------
    set_ : MatrixSet or array_like, shape (m, q, q)
    delta : float
        Nonnegative threshold, raised to :func:`zero_floor` if smaller.
    spectrum : tuple, optional
        Precomputed output of :func:`l_spectrum`.

    Raises
    ------
    AmbiguousThresholdError
        If ``delta`` is within ``1e-12 * sigma_max`` of a singular value.
    """
    if delta < 0:
        raise PreconditionError("delta must be nonnegative")
    D = as_matrix_set(set_)
    q = D.d
    s, V = spectrum if spectrum is not None else l_spectrum(D)
    smax = s[-1] if s.size else 0.0
    floor = zero_floor(q, smax)
    if delta > floor and np.any(np.abs(s - delta) <= 1e-12 * smax):
        raise AmbiguousThresholdError(f"delta={delta!r} coincides with a singular value")
    delta = max(float(delta), floor)
    k = int(np.searchsorted(s, delta, side="right"))
    basis = [unvec(V[:, j], q) for j in range(k)]
    nxt = float(s[k]) if k < s.size else np.inf
    return NullBasis(basis=basis, sigma_kept=s[:k].copy(), sigma_next=nxt,
                     delta=float(delta), spectrum=s)
