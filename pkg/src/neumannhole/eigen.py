"""Lowest eigenpairs of the generalized Hermitian problem ``K x = lambda M x``."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FormPair
from .errors import ConvergenceError, InvalidSpecError

DENSE_LIMIT = 600
DEFAULT_SHIFT = -0.5
MAX_RESTARTS = 4


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, M-orthonormal
    residuals: np.ndarray
    h: float
    m_requested: int
    runtime_ms: float = 0.0

    @property
    def m(self) -> int:
        return len(self.eigenvalues)


def _rayleigh_ritz(K, M, V):
    kr = V.conj().T @ (K @ V)
    mr = V.conj().T @ (M @ V)
    kr = 0.5 * (kr + kr.conj().T)
    mr = 0.5 * (mr + mr.conj().T)
    w, y = sla.eigh(kr, mr)
    return w, V @ y


def residual_norms(fp: FormPair, lam: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Dual-norm residuals ``sqrt(r^* M^{-1} r)`` with ``r = K x - lambda M x``."""
    R = fp.K @ X - (fp.M @ X) * lam[None, :]
    Z = np.column_stack([fp.solve_mass(R[:, i]) for i in range(R.shape[1])])
    return np.sqrt(np.maximum(np.einsum("ij,ij->j", R.conj(), Z).real, 0.0))


def _fix_phase(X: np.ndarray) -> np.ndarray:
    """Make the largest-modulus entry of each column real positive (deterministic output)."""
    idx = np.argmax(np.abs(X), axis=0)
    ph = X[idx, np.arange(X.shape[1])]
    return X * (np.abs(ph) / ph)[None, :]


def solve_lowest(fp: FormPair, m: int, tol: float = 1e-8, shift: float = DEFAULT_SHIFT) -> SpectralResult:
    """Lowest ``m`` Ritz pairs of ``(K, M)``.

    Small problems go through a dense Cholesky-based solver; larger ones use
    ARPACK in shift-invert mode around ``shift`` (below the nonnegative
    spectrum) followed by a Rayleigh-Ritz clean-up.
    """
    n = fp.n
    if m >= n:
        raise InvalidSpecError(f"eigen: m={m} must be smaller than n={n}", field="m")
    if not 1e-12 < tol < 1e-4:
        raise InvalidSpecError("eigen: tol must lie in (1e-12, 1e-4)", field="tol")
    t0 = time.perf_counter()
    K = fp.K
    M = fp.M
    if n <= DENSE_LIMIT:
        w, X = sla.eigh(K.toarray(), M.toarray(), subset_by_index=[0, m - 1])
    else:
        A = (K - shift * M).tocsc().astype(complex)
        lu = spla.splu(A)
        op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
        ncv = min(n - 1, max(2 * m + 1, m + 20))
        v0 = np.ones(n, dtype=complex)
        X = None
        for attempt in range(MAX_RESTARTS):
            try:
                _, X = spla.eigsh(K, k=m, M=M.astype(complex), sigma=shift, OPinv=op,
                                  v0=v0, ncv=ncv, tol=tol * 1e-2, maxiter=2000 * (attempt + 1))
                break
            except spla.ArpackNoConvergence as exc:
                ncv = min(n - 1, 2 * ncv)
                if attempt == MAX_RESTARTS - 1:
                    raise ConvergenceError("eigen: ARPACK did not converge",
                                           residuals=getattr(exc, "eigenvalues", None)) from exc
        w, X = _rayleigh_ritz(K, M, X)
    order = np.argsort(w, kind="stable")
    w = np.real(w[order])
    X = _fix_phase(np.asarray(X[:, order], dtype=complex))
    res = residual_norms(fp, w, X)
    bad = res > tol * (1.0 + np.abs(w))
    if np.any(bad):
        raise ConvergenceError(f"eigen: residuals {res[bad]} above tolerance", residuals=res)
    return SpectralResult(eigenvalues=w, eigenvectors=X, residuals=res, h=fp.mesh.h,
                          m_requested=m, runtime_ms=1e3 * (time.perf_counter() - t0))
