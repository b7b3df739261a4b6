"""Matrix sets, partitions and the block-structure helpers shared by all modules."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, DimensionError

__all__ = [
    "MatrixSet",
    "Partition",
    "BlockDiagonalization",
    "as_matrix_set",
    "stack_underline",
    "block_diag_part",
    "off_block_diag_part",
    "partitions_equivalent",
    "pinv",
    "normalize_blocks",
    "offblock_residual",
]


def _frozen(a):
    a = np.array(a, dtype=np.float64, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MatrixSet:
    """An ordered collection of ``m`` real ``d x d`` matrices.

    The matrices are stored as a read-only array of shape ``(m, d, d)``.
    """

    matrices: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.matrices, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise DimensionError(f"expected shape (m, d, d), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError("a matrix set needs m >= 1 and d >= 1")
        object.__setattr__(self, "matrices", _frozen(arr))

    @property
    def m(self) -> int:
        return self.matrices.shape[0]

    @property
    def d(self) -> int:
        return self.matrices.shape[1]

    def __len__(self):
        return self.m

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, i):
        return self.matrices[i]

    def congruence(self, left: np.ndarray) -> "MatrixSet":
        """Return ``{left @ M_i @ left.T}``."""
        return MatrixSet(left @ self.matrices @ left.T)

    def fro_norm(self) -> float:
        """Frobenius norm of the stacked matrix, ``||stack_underline(self)||_F``."""
        return float(np.sqrt(2.0) * np.linalg.norm(self.matrices))


def as_matrix_set(x) -> MatrixSet:
    if isinstance(x, MatrixSet):
        return x
    return MatrixSet(x)


@dataclass(frozen=True)
class Partition:
    """A composition ``(p_1, ..., p_l)`` of ``p`` into positive parts."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(int(x) for x in self.parts)
        if not parts:
            raise DimensionError("a partition needs at least one part")
        if any(x < 1 for x in parts):
            raise DimensionError(f"partition parts must be positive, got {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Parse a comma separated list such as ``"2,3,3,4"``."""
        try:
            parts = [int(s) for s in text.replace(" ", "").split(",") if s]
        except ValueError as exc:
            raise DimensionError(f"cannot parse partition {text!r}") from exc
        return cls(tuple(parts))

    @classmethod
    def single(cls, p: int) -> "Partition":
        return cls((p,))

    @property
    def total(self) -> int:
        return sum(self.parts)

    @property
    def cardinality(self) -> int:
        return len(self.parts)

    @property
    def offsets(self) -> tuple:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.parts)]))

    def slices(self) -> list:
        off = self.offsets
        return [slice(off[j], off[j + 1]) for j in range(self.cardinality)]

    def labels(self) -> np.ndarray:
        """Block index of every row/column, shape ``(p,)``."""
        return np.repeat(np.arange(self.cardinality), self.parts)

    def mask(self) -> np.ndarray:
        """Boolean ``p x p`` mask that is True on the diagonal blocks."""
        lab = self.labels()
        return lab[:, None] == lab[None, :]

    def __len__(self):
        return self.cardinality

    def __iter__(self):
        return iter(self.parts)

    def __str__(self):
        return ",".join(str(x) for x in self.parts)


@dataclass(frozen=True)
class BlockDiagonalization:
    """A joint block diagonalization ``(partition, diagonalizer, blocks)``.

    ``blocks`` holds the ``p x p`` matrices with off-block entries set to zero.
    ``residual`` is the off-block residual of the diagonalizer on the input.
    """

    partition: Partition
    diagonalizer: np.ndarray
    blocks: MatrixSet
    residual: float
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "diagonalizer", _frozen(self.diagonalizer))
        if self.diagonalizer.shape[1] != self.partition.total:
            raise DimensionError("diagonalizer columns do not match the partition")

    @property
    def rank(self) -> int:
        return self.partition.total


def stack_underline(set_) -> np.ndarray:
    """Stack ``[D_1^T; D_1; ...; D_m^T; D_m]`` into a ``2md x d`` matrix."""
    mats = as_matrix_set(set_).matrices
    m, d, _ = mats.shape
    out = np.empty((m, 2, d, d))
    out[:, 0] = mats.transpose(0, 2, 1)
    out[:, 1] = mats
    return out.reshape(2 * m * d, d)


def _check_partition(X, tau):
    if X.shape[-1] != tau.total or X.shape[-2] != tau.total:
        raise DimensionError(
            f"partition total {tau.total} does not match matrix shape {X.shape[-2:]}"
        )


def block_diag_part(X, tau: Partition) -> np.ndarray:
    """Zero every entry outside the diagonal blocks of ``tau``.

    Works on a single ``p x p`` matrix or a stack ``(..., p, p)``.
    """
    X = np.asarray(X, dtype=np.float64)
    _check_partition(X, tau)
    return np.where(tau.mask(), X, 0.0)


def off_block_diag_part(X, tau: Partition) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    _check_partition(X, tau)
    return np.where(tau.mask(), 0.0, X)


def partitions_equivalent(tau: Partition, other: Partition):
    """Decide whether two partitions are reorderings of one another.

    Returns
    -------
    equivalent : bool
    perm : tuple of int or None
        When equivalent, ``perm[j]`` is the index in ``other`` of the part
        matched with ``tau.parts[j]``, so ``other.parts[perm[j]] == tau.parts[j]``.
    """
    if tau.cardinality != other.cardinality:
        return False, None
    if Counter(tau.parts) != Counter(other.parts):
        return False, None
    free = {}
    for k, x in enumerate(other.parts):
        free.setdefault(x, []).append(k)
    perm = tuple(free[x].pop(0) for x in tau.parts)
    return True, perm


def pinv(A) -> np.ndarray:
    """Moore-Penrose inverse with cutoff ``max(d, p) * eps * sigma_max``."""
    A = np.asarray(A, dtype=np.float64)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(A.T.shape)
    cutoff = max(A.shape) * np.finfo(float).eps * s[0]
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (Vt.T * inv) @ U.T


def _require_full_column_rank(A):
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[-1] <= max(A.shape) * np.finfo(float).eps * s[0]:
        raise DegenerateInputError("diagonalizer does not have full column rank")


def _inv_sqrt_spd(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    if w[0] <= 0:
        raise DegenerateInputError("block Gram matrix is not positive definite")
    return (V / np.sqrt(w)) @ V.T


def normalize_blocks(A, tau: Partition) -> np.ndarray:
    """Rescale column blocks of ``A`` so that ``Bdiag(A^+ A^+T) = I``.

    Each block ``A_j`` is replaced by ``A_j S_j`` with ``S_j`` the symmetric
    square root of the corresponding diagonal block of ``A^+ A^+T``; this is a
    block-diagonal change of basis and leaves the solution class unchanged.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape[1] != tau.total:
        raise DimensionError("diagonalizer columns do not match the partition")
    _require_full_column_rank(A)
    P = pinv(A)
    M = P @ P.T
    out = A.copy()
    for sl in tau.slices():
        out[:, sl] = A[:, sl] @ np.linalg.inv(_inv_sqrt_spd(M[sl, sl]))
    return out


def offblock_residual(set_, A, tau: Partition) -> float:
    """Root-sum-square off-block mass of ``A^+ C_i A^+T`` after normalization."""
    C = as_matrix_set(set_)
    A = normalize_blocks(A, tau)
    if A.shape[0] != C.d:
        raise DimensionError("diagonalizer rows do not match the matrix dimension")
    P = pinv(A)
    S = P @ C.matrices @ P.T
    return float(np.linalg.norm(off_block_diag_part(S, tau)))


def block_gram_normalize(A, tau: Partition) -> np.ndarray:
    """Orthonormalize each column block of ``A`` so that ``Bdiag(A^T A) = I``."""
    A = np.asarray(A, dtype=np.float64)
    out = A.copy()
    for sl in tau.slices():
        G = A[:, sl].T @ A[:, sl]
        out[:, sl] = A[:, sl] @ _inv_sqrt_spd(G)
    return out

