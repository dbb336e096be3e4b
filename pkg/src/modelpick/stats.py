"""Deterministic numeric kernels shared by every scoring method.

Conventions used throughout the package:

* population (1/n) moments wherever a normalization is internal; the
  sample/population choice cancels inside correlations,
* a zero-variance vector has correlation 0 with anything (and correlation
  distance 1),
* Spearman resolves ties with average (fractional) ranks.

Pairwise row correlations and cosines are computed through unit-normalized
rows and exact per-pair differences, so identical rows land at distance
exactly 0 and uniform inputs (e.g. one-hot label rows) produce bitwise
uniform off-diagonal values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PcaModel",
    "corrcoef_rows",
    "correlation_distances",
    "cosine_distances",
    "pca_fit",
    "pca_transform",
    "pearson",
    "pseudo_inverse",
    "rankdata",
    "spearman",
    "zscore",
]


def _vector_pair(x, y):
    vx = np.asarray(x, dtype=np.float64)
    vy = np.asarray(y, dtype=np.float64)
    if vx.ndim != 1 or vy.ndim != 1 or vx.shape != vy.shape:
        raise ValueError(f"length mismatch: {np.shape(x)} vs {np.shape(y)}")
    if vx.size < 2:
        raise ValueError("too few samples: need at least 2")
    return vx, vy


def pearson(x, y) -> float:
    """Pearson product-moment correlation in [-1, 1].

    Returns 0 if either input has zero variance.
    """
    vx, vy = _vector_pair(x, y)
    cx = vx - vx.mean()
    cy = vy - vy.mean()
    sx = float(cx @ cx)
    sy = float(cy @ cy)
    if sx == 0.0 or sy == 0.0:
        return 0.0
    r = float(cx @ cy) / float(np.sqrt(sx * sy))
    return min(1.0, max(-1.0, r))


def rankdata(v) -> np.ndarray:
    """Ranks 1..n with ties assigned their average rank."""
    a = np.asarray(v, dtype=np.float64)
    _, inverse, counts = np.unique(a, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    average = starts + (counts + 1) / 2.0
    return average[inverse.reshape(a.shape)]


def spearman(x, y) -> float:
    """Rank correlation: Pearson of average-tie ranks."""
    vx, vy = _vector_pair(x, y)
    return pearson(rankdata(vx), rankdata(vy))


def _unit_rows(X, center: bool):
    if center:
        X = X - X.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", X, X))
    ok = norms > 0.0
    U = np.zeros_like(X)
    U[ok] = X[ok] / norms[ok, None]
    return U, ok


def _half_squared_row_distances(U) -> np.ndarray:
    n = U.shape[0]
    D = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        diff = U - U[i]
        D[i] = 0.5 * np.einsum("ij,ij->i", diff, diff)
    return D


def corrcoef_rows(M) -> np.ndarray:
    """All-pairs Pearson correlation between the rows of an n x d matrix.

    The diagonal is 1 for non-constant rows; constant rows correlate 0 with
    everything, including themselves.
    """
    X = np.asarray(M, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, d = X.shape
    if n < 2:
        raise ValueError("too few rows: need at least 2")
    if d < 2:
        raise ValueError("too few features: need at least 2 columns")
    idx = np.arange(n)
    if d == 2:
        # a centered 2-vector is a multiple of (1, -1), so the correlation
        # is exactly the sign of the paired differences product
        signs = np.sign(X[:, 0] - X[:, 1])
        return np.outer(signs, signs)
    U, ok = _unit_rows(X, center=True)
    C = 1.0 - _half_squared_row_distances(U)
    C[~ok, :] = 0.0
    C[:, ~ok] = 0.0
    np.clip(C, -1.0, 1.0, out=C)
    C[idx, idx] = np.where(ok, 1.0, 0.0)
    return C


def correlation_distances(M) -> np.ndarray:
    """1 - corrcoef_rows(M): 0 for identical rows, 1 for constant rows."""
    return 1.0 - corrcoef_rows(M)


def cosine_distances(M) -> np.ndarray:
    """All-pairs cosine distance between rows, in [0, 2].

    Zero-norm rows sit at distance 1 from everything (the zero-variance
    convention), including themselves off-diagonal.
    """
    X = np.asarray(M, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n = X.shape[0]
    if n < 2:
        raise ValueError("too few rows: need at least 2")
    U, ok = _unit_rows(X, center=False)
    D = _half_squared_row_distances(U)
    D[~ok, :] = 1.0
    D[:, ~ok] = 1.0
    np.clip(D, 0.0, 2.0, out=D)
    idx = np.arange(n)
    D[idx, idx] = np.where(ok, 0.0, 1.0)
    return D


def zscore(v) -> np.ndarray:
    """Standardize to mean 0 and population std 1; constant input -> zeros."""
    a = np.asarray(v, dtype=np.float64)
    c = a - a.mean()
    s = float(np.sqrt((c @ c) / a.size)) if a.ndim == 1 else float(np.sqrt(np.mean(c * c)))
    if s == 0.0:
        return np.zeros_like(a)
    return c / s


# --------------------------------------------------------------------------
# PCA and pseudo-inverse


@dataclass
class PcaModel:
    mean: np.ndarray                # (d,)
    components: np.ndarray          # (f, d), orthonormal rows
    explained_variance: np.ndarray  # (f,), non-increasing, >= 0


def _complete_orthonormal(components: np.ndarray, start: int) -> None:
    """Fill rows starting at ``start`` with orthonormal directions.

    Used when the data rank is below the requested component count;
    deterministic: canonical basis vectors, Gram-Schmidt against the rows
    already placed.
    """
    f, d = components.shape
    row = start
    for axis in range(d):
        if row >= f:
            return
        v = np.zeros(d)
        v[axis] = 1.0
        v -= components[:row].T @ (components[:row] @ v)
        norm = float(np.sqrt(v @ v))
        if norm > 1e-6:
            components[row] = v / norm
            row += 1
    if row < f:
        raise ValueError("could not complete an orthonormal basis")


def pca_fit(M, f: int) -> PcaModel:
    """Principal components of the rows of M, reduced to min(f, n-1, d).

    Eigendecomposition of the d x d covariance when d <= n, of the n x n
    Gram matrix otherwise. Component signs are pinned by making each row's
    largest-magnitude loading positive.
    """
    X = np.asarray(M, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, d = X.shape
    if n < 2:
        raise ValueError("too few rows: need at least 2")
    if int(f) < 1:
        raise ValueError("target dimension must be at least 1")
    mean = X.mean(axis=0)
    Xc = X - mean
    if not np.any(Xc):
        raise ValueError("degenerate data: all rows identical")
    f_eff = min(int(f), n - 1, d)
    if d <= n:
        cov = (Xc.T @ Xc) / n
        evals, evecs = np.linalg.eigh(cov)
        evals = evals[::-1][:f_eff]
        components = evecs[:, ::-1][:, :f_eff].T.copy()
    else:
        gram = (Xc @ Xc.T) / n
        evals_all, U = np.linalg.eigh(gram)
        evals_all = evals_all[::-1]
        U = U[:, ::-1]
        evals = evals_all[:f_eff].copy()
        floor = max(float(evals_all[0]), 0.0) * n * 1e-12
        components = np.zeros((f_eff, d))
        filled = 0
        for k in range(f_eff):
            if evals[k] <= floor:
                break
            v = Xc.T @ U[:, k]
            components[k] = v / np.sqrt(float(v @ v))
            filled += 1
        if filled < f_eff:
            evals[filled:] = 0.0
            _complete_orthonormal(components, filled)
    evals = np.clip(evals, 0.0, None)
    strongest = np.argmax(np.abs(components), axis=1)
    flip = components[np.arange(f_eff), strongest] < 0.0
    components[flip] *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance=evals)


def pca_transform(model: PcaModel, M) -> np.ndarray:
    """Project rows of M onto the fitted components; output is n x f."""
    X = np.asarray(M, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.mean.shape[0]:
        raise ValueError("matrix width does not match the fitted model")
    return (X - model.mean) @ model.components.T


def pseudo_inverse(A) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues at or below d * lambda_max * 1e-10 are treated as zero.
    """
    S = np.asarray(A, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("expected a square matrix")
    if S.size and float(np.max(np.abs(S - S.T))) > 1e-9:
        raise ValueError("matrix is not symmetric within 1e-9")
    sym = (S + S.T) / 2.0
    evals, evecs = np.linalg.eigh(sym)
    lam_max = float(evals[-1]) if evals.size else 0.0
    if lam_max <= 0.0:
        return np.zeros_like(S)
    cutoff = S.shape[0] * lam_max * 1e-10
    keep = evals > cutoff
    inv = np.where(keep, 1.0 / np.where(keep, evals, 1.0), 0.0)
    return (evecs * inv) @ evecs.T
