"""Seeded synthetic instances: the planted block model and ISA covariances.

All randomness comes from ``numpy.random.Generator(numpy.random.Philox(seed))``,
a counter-based generator, so a seed fixes an instance bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import MatrixSet, Partition
from .exceptions import DimensionError, PreconditionError

EXAMPLE1 = dict(m=10, n=15, tau=Partition((2, 3, 3, 4)))


def rng_for(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def snr_to_sigma(snr_db: float) -> float:
    """Noise std for ``SNR = 10 log10(1 / sigma^2)``; ``inf`` gives 0."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 20.0)


@dataclass(frozen=True)
class PlantedInstance:
    observed: MatrixSet
    truth_A: np.ndarray
    truth_blocks: MatrixSet
    partition: Partition
    sigma: float
    seed: int

    @property
    def clean(self) -> MatrixSet:
        """``A Sigma_i A^T`` without noise."""
        return MatrixSet(self.truth_A @ self.truth_blocks.matrices @ self.truth_A.T)

    def block_lists(self) -> list:
        """Per-block matrix sets ``[{Sigma_i^(jj)}_i for j]``."""
        return [MatrixSet(self.truth_blocks.matrices[:, sl, sl])
                for sl in self.partition.slices()]


def random_block_diagonal(rng, tau: Partition, m: int) -> np.ndarray:
    out = np.zeros((m, tau.total, tau.total))
    for sl in tau.slices():
        k = sl.stop - sl.start
        out[:, sl, sl] = rng.standard_normal((m, k, k))
    return out


def gen_example1(m: int = 10, n: int = 15, p=None, tau=(2, 3, 3, 4), snr_db: float = 40.0,
                 seed: int = 0) -> PlantedInstance:
    """``C_i = A D_i A^T + N_i`` with standard normal ``A`` and block entries.

    ``p`` defaults to ``tau.total`` and must agree with it when given.
    """
    tau = tau if isinstance(tau, Partition) else Partition(tuple(tau))
    p = tau.total if p is None else int(p)
    if p != tau.total:
        raise DimensionError(f"partition {tau} sums to {tau.total}, not p={p}")
    if p > n:
        raise DimensionError(f"p={p} exceeds n={n}")
    rng = rng_for(seed)
    A = rng.standard_normal((n, p))
    D = random_block_diagonal(rng, tau, m)
    sigma = snr_to_sigma(snr_db)
    C = A @ D @ A.T
    if sigma > 0:
        C = C + sigma * rng.standard_normal((m, n, n))
    return PlantedInstance(MatrixSet(C), A, MatrixSet(D), tau, sigma, seed)


def gen_isa_covariances(group_dims=(3, 3, 3), d: int = 9, m: int = 10,
                        samples_per_domain: int = 6000, seed: int = 0) -> PlantedInstance:
    """Empirical covariances of mixed independent source groups, one per domain.

    In each domain every group draws a covariance ``W^T W + 0.1 I`` and
    Gaussian samples from it; the stacked sources are mixed by a random
    ``d x p`` matrix.
    """
    tau = group_dims if isinstance(group_dims, Partition) else Partition(tuple(group_dims))
    p = tau.total
    if p > d:
        raise DimensionError(f"p={p} exceeds d={d}")
    if samples_per_domain < p:
        raise PreconditionError("need at least p samples per domain")
    rng = rng_for(seed)
    while True:
        A = rng.standard_normal((d, p))
        if np.linalg.matrix_rank(A) == p:
            break
    blocks = np.zeros((m, p, p))
    covs = np.zeros((m, d, d))
    for i in range(m):
        for sl in tau.slices():
            k = sl.stop - sl.start
            W = rng.standard_normal((k, k))
            blocks[i, sl, sl] = W.T @ W + 0.1 * np.eye(k)
        L = linalg.cholesky(blocks[i], lower=True)
        s = L @ rng.standard_normal((p, samples_per_domain))
        x = A @ s
        covs[i] = x @ x.T / samples_per_domain
    return PlantedInstance(MatrixSet(covs), A, MatrixSet(blocks), tau, float("nan"), seed)


def remark_family(m: int = 5, seed: int = 0) -> MatrixSet:
    """``diag([[0, a], [a, b]], [[0, a], [a, c]])`` with random ``a, b, c``.

    Both blocks admit a non-block-diagonal joint diagonalizer, so the pair
    fails the nonequivalence condition.
    """
    rng = rng_for(seed)
    a, b, c = rng.standard_normal((3, m))
    out = np.zeros((m, 4, 4))
    out[:, 0, 1] = out[:, 1, 0] = a
    out[:, 1, 1] = b
    out[:, 2, 3] = out[:, 3, 2] = a
    out[:, 3, 3] = c
    return MatrixSet(out)
