"""Score and feature calibration: PCA reduction, per-column feature
standardization, and the depth-aware score ensembles."""

from __future__ import annotations

import numpy as np

from .methods import ENSEMBLE_NAMES
from .stats import pca_fit, pca_transform


def reduce_features(features, dim: int) -> np.ndarray:
    """PCA-reduce probe features to min(dim, n-1, d) columns.

    When ``dim`` already covers every principal direction the features are
    returned unchanged (as float64): a full-rank transform is only a change
    of basis, and correlation-based scores are basis-sensitive, so applying
    it would perturb them for no information gain.
    """
    F = np.asarray(features, dtype=np.float64)
    if F.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, d = F.shape
    if n < 2:
        raise ValueError("too few rows: need at least 2")
    if int(dim) < 1:
        raise ValueError("target dimension must be at least 1")
    if not np.any(F - F[0]):
        raise ValueError("degenerate data: all rows identical")
    if int(dim) >= min(n - 1, d):
        return F.copy()
    model = pca_fit(F, int(dim))
    return pca_transform(model, F)


def normalize_features(features) -> np.ndarray:
    """Standardize each column over the probe set (population std).

    Constant columns become zeros. Leaves correlation-based scores
    untouched; affects distance- and covariance-based ones.
    """
    F = np.asarray(features, dtype=np.float64)
    if F.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if F.shape[0] < 2:
        raise ValueError("too few rows: need at least 2")
    mu = F.mean(axis=0)
    sd = np.sqrt(np.mean((F - mu) ** 2, axis=0))
    safe = np.where(sd > 0, sd, 1.0)
    out = (F - mu) / safe
    out[:, sd == 0] = 0.0
    return out


def ensemble_depth(
    raw_scores: dict,
    depths: dict,
    ell_max: int = 50,
    variant: str = "znorm_plus_depth",
    lambda_ell: float = 0.25,
) -> dict:
    """Combine one target's raw scores with the relative-depth capacity term.

    znorm_plus_depth:   (a - mean)/std       + depth/ell_max
    minmax_plus_depth:  (a - min)/(max - min) + depth/ell_max
    minmax_scaled:      (a - min)/(max - min) + lambda_ell * depth/ell_max

    Mean/std and min/max are taken over the batch (all sources for one
    target); a batch with zero spread keeps only the depth term.
    """
    if variant not in ENSEMBLE_NAMES or variant == "none":
        raise ValueError(f"unknown ensemble variant '{variant}'")
    if len(raw_scores) < 2:
        raise ValueError("too few models: an ensemble needs at least 2 scores")
    if ell_max < 1:
        raise ValueError("ell_max must be at least 1")
    if lambda_ell <= 0:
        raise ValueError("lambda_ell must be positive")
    missing = sorted(set(raw_scores) - set(depths))
    if missing:
        raise ValueError(f"no depth for model '{missing[0]}'")
    ids = sorted(raw_scores)
    a = np.asarray([float(raw_scores[i]) for i in ids])
    if variant == "znorm_plus_depth":
        sd = float(np.sqrt(np.mean((a - a.mean()) ** 2)))
        normed = (a - a.mean()) / sd if sd > 0 else np.zeros_like(a)
    else:
        lo, hi = float(a.min()), float(a.max())
        normed = (a - lo) / (hi - lo) if hi > lo else np.zeros_like(a)
    coef = lambda_ell if variant == "minmax_scaled" else 1.0
    return {
        mid: float(normed[j] + coef * depths[mid] / ell_max)
        for j, mid in enumerate(ids)
    }
