"""Quartic minimization over the null space via a Z-eigenvalue power iteration.

Minimizing ``tr(X^4)`` over ``X = sum_j alpha_j X_j`` with ``tr(X) = 0`` and
``tr(X^2) = q`` becomes ``min N beta^4`` on the unit sphere once the Gram
matrix ``K_ij = tr(X_i X_j)`` is whitened by its Cholesky factor.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .commutant import NullBasis, null_basis, unvec, vec
from .core import as_matrix_set
from .exceptions import ConvergenceError

DEFAULT_RESTARTS = 16
DEFAULT_MAXITER = 5000
DEFAULT_TOL = 1e-10


class Infeasible(Exception):
    """The feasible set of the quartic program is (numerically) empty."""


@dataclass
class QuarticForm:
    order4: np.ndarray
    gram: np.ndarray
    chol: np.ndarray
    basis_ref: NullBasis

    @property
    def s(self) -> int:
        return self.gram.shape[0]

    def value(self, beta) -> float:
        """``N beta^4``."""
        return float(np.einsum("ijkl,i,j,k,l->", self.order4, beta, beta, beta, beta))


@dataclass
class OptSolution:
    X_star: Optional[np.ndarray]
    objective: float
    eigenvalues: np.ndarray
    feasible: bool
    info: dict = field(default_factory=dict)


def deflate_identity(basis: NullBasis) -> NullBasis:
    """Orthonormal basis of ``span(basis)`` intersected with traceless matrices.

    Raises :class:`Infeasible` when the intersection is ``{0}``.
    """
    if basis.s == 0:
        raise Infeasible("empty null basis")
    q = basis.q
    V = basis.as_vectors()
    t = V.T @ vec(np.eye(q))
    if np.linalg.norm(t) <= 1e-12 * np.sqrt(q):
        W = np.eye(basis.s)
    else:
        W = linalg.null_space(t[None, :])
    if W.shape[1] == 0:
        raise Infeasible("null space contains only scalar matrices")
    U, _ = np.linalg.qr(V @ W)
    out = [unvec(U[:, j], q) for j in range(U.shape[1])]
    return NullBasis(basis=out, sigma_kept=basis.sigma_kept, sigma_next=basis.sigma_next,
                     delta=basis.delta, spectrum=basis.spectrum)


def build_quartic(basis: NullBasis, pd_tol: float = 1e-10) -> QuarticForm:
    """Whitened, fully symmetric order-4 tensor for ``tr(X^4)`` on the basis."""
    Xs = np.array(basis.basis)
    s = Xs.shape[0]
    K = np.einsum("iab,jba->ij", Xs, Xs)
    K = 0.5 * (K + K.T)
    w = np.linalg.eigvalsh(K)
    if w[0] <= pd_tol * np.trace(K) / s:
        raise Infeasible(f"Gram matrix not positive definite (min eigenvalue {w[0]:.3e})")
    G = linalg.cholesky(K, lower=False)
    P = np.einsum("iab,jbc->ijac", Xs, Xs)
    M = np.einsum("ijac,klca->ijkl", P, P)
    M = symmetrize4(M)
    Ginv_t = linalg.solve_triangular(G, np.eye(s), lower=False).T
    N = np.einsum("ijkl,ai,bj,ck,dl->abcd", M, Ginv_t, Ginv_t, Ginv_t, Ginv_t)
    return QuarticForm(order4=symmetrize4(N), gram=K, chol=G, basis_ref=basis)


def symmetrize4(T) -> np.ndarray:
    return sum(T.transpose(p) for p in itertools.permutations(range(4))) / 24.0


def _apply3(N, x):
    return np.einsum("ijkl,j,k,l->i", N, x, x, x)


def min_z_eigen(form: QuarticForm, restarts: int = DEFAULT_RESTARTS,
                tol: float = DEFAULT_TOL, maxiter: int = DEFAULT_MAXITER, seed=0):
    """Smallest Z-eigenpair found by a multi-start shifted power iteration.

    Each restart iterates ``x <- normalize(-N x^3 + shift * x)``, the shifted
    power method applied to ``-N``, from a seeded random unit vector.

    Returns
    -------
    lam : float
    beta : ndarray, shape (s,)
    info : dict
        Iteration counts and residuals per restart.
    """
    N = form.order4
    s = form.s
    if s == 1:
        return float(N[0, 0, 0, 0]), np.ones(1), {"restarts": [], "converged": True}
    shift = 1.0 + float(np.abs(N).sum())
    rng = np.random.Generator(np.random.Philox(seed))
    best = None
    runs = []
    for r in range(max(1, restarts)):
        x = rng.standard_normal(s)
        x /= np.linalg.norm(x)
        res = np.inf
        for it in range(maxiter):
            y = _apply3(N, x)
            lam = float(x @ y)
            res = float(np.linalg.norm(y - lam * x))
            if res <= tol:
                break
            x = -y + shift * x
            x /= np.linalg.norm(x)
        x, lam, res = _polish(N, x)
        runs.append({"iterations": it + 1, "residual": res, "lambda": lam})
        cand = (res <= tol, lam, r, x)
        if best is None or _better(cand, best):
            best = cand
    converged, lam, _, x = best
    if not converged:
        raise ConvergenceError("shifted power method did not converge", best=(lam, x))
    return lam, x, {"restarts": runs, "converged": True}


def _better(a, b):
    # converged runs first, then lowest eigenvalue, then lowest restart index
    if a[0] != b[0]:
        return a[0]
    if not np.isclose(a[1], b[1], rtol=1e-12, atol=1e-14):
        return a[1] < b[1]
    return a[2] < b[2]


def _polish(N, x, steps=20):
    """Newton refinement on the sphere; kept only if it does not increase the residual."""
    y = _apply3(N, x)
    lam = float(x @ y)
    res = float(np.linalg.norm(y - lam * x))
    s = x.size
    for _ in range(steps):
        if res < 1e-15:
            break
        H = 3.0 * np.einsum("ijkl,k,l->ij", N, x, x)
        Pt = np.eye(s) - np.outer(x, x)
        g = Pt @ y
        J = Pt @ (H - lam * np.eye(s)) @ Pt + np.outer(x, x)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            break
        xn = x + step
        xn /= np.linalg.norm(xn)
        yn = _apply3(N, xn)
        ln = float(xn @ yn)
        rn = float(np.linalg.norm(yn - ln * xn))
        if rn >= res or ln > lam + 1e-9 * max(1.0, abs(lam)):
            break
        x, y, lam, res = xn, yn, ln, rn
    return x, lam, res


def solve_opt(set_, delta: float, restarts: int = DEFAULT_RESTARTS,
              tol: float = DEFAULT_TOL, seed=0, spectrum=None) -> OptSolution:
    """Minimize ``tr(X^4)`` over the relaxed null space with the trace constraints.

    The returned ``X_star`` is scaled to ``tr(X^2) = q`` and its sign is chosen
    so that ``tr(X^3) >= 0``.
    """
    D = as_matrix_set(set_)
    q = D.d
    nb = null_basis(D, delta, spectrum=spectrum)
    info = {"null_dim": nb.s, "delta": nb.delta, "sigma_kept": nb.sigma_kept.tolist(),
            "sigma_next": nb.sigma_next}
    try:
        traceless = deflate_identity(nb)
        form = build_quartic(traceless)
    except Infeasible as exc:
        info["reason"] = str(exc)
        return OptSolution(None, np.nan, np.array([]), False, info)
    lam, beta, pinfo = min_z_eigen(form, restarts=restarts, tol=tol, seed=seed)
    alpha = linalg.solve_triangular(form.chol, beta, lower=False)
    X = np.einsum("j,jab->ab", alpha, np.array(traceless.basis))
    X *= np.sqrt(q / np.trace(X @ X))
    if np.trace(X @ X @ X) < 0:
        X = -X
    info.update(s=form.s, z_eigenvalue=lam, power=pinfo)
    return OptSolution(X, float(np.trace(np.linalg.matrix_power(X, 4))),
                       np.linalg.eigvals(X), True, info)
