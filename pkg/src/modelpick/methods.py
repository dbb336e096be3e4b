"""Transferability scoring methods.

Every scorer reduces one (source model, target probe set) pair to a single
real number; higher predicts a better transfer after fine-tuning. Scorers
are pure given their inputs and an explicit seed, so callers may fan out
across transfers freely.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .embed import LabelEmbedding, embedding_distances
from .errors import DidNotConverge, UnsupportedTask
from .stats import (
    correlation_distances,
    cosine_distances,
    pearson,
    pseudo_inverse,
    spearman,
    zscore,
)

METHOD_NAMES = (
    "parc",
    "rsa",
    "dds",
    "leep",
    "nce",
    "hscore",
    "knn_cv",
    "logistic",
    "heuristic",
)

ENSEMBLE_NAMES = ("none", "znorm_plus_depth", "minmax_plus_depth", "minmax_scaled")

#: methods that consume penultimate-layer features (and so can be PCA-reduced)
FEATURE_METHODS = ("parc", "rsa", "dds", "hscore", "knn_cv", "logistic")
#: methods that consume source-classifier probabilities
PROB_METHODS = ("leep", "nce")


@dataclass
class MethodConfig:
    """One scoring configuration: method name plus calibration knobs."""

    method: str
    pca_dim: int | None = None
    k: int = 1
    ensemble: str = "none"
    lambda_ell: float = 0.25
    ell_max: int = 50
    seed: int = 0
    normalize: bool = False
    probe_model_id: str | None = None

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ValueError(f"unknown method '{self.method}'")
        if self.ensemble not in ENSEMBLE_NAMES:
            raise ValueError(f"unknown ensemble '{self.ensemble}'")
        if self.pca_dim is not None and self.pca_dim < 1:
            raise ValueError("pca_dim must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.lambda_ell <= 0:
            raise ValueError("lambda_ell must be positive")
        if self.ell_max < 1:
            raise ValueError("ell_max must be at least 1")


@dataclass
class ScoreRecord:
    """One scored transfer: raw score, optional ensembled score, timing."""

    method: str
    model_id: str
    target_id: str
    raw_score: float
    calibrated_score: float | None = None
    wall_time_ms: float = 0.0


def _feature_matrix(F, name="features", min_rows=2, min_cols=1) -> np.ndarray:
    X = np.asarray(F, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix")
    if X.shape[0] < min_rows:
        raise ValueError(f"too few images: {name} has {X.shape[0]} rows, need {min_rows}")
    if X.shape[1] < min_cols:
        raise ValueError(f"{name} needs at least {min_cols} columns")
    return X


def _embedding_matrix(E) -> np.ndarray:
    if isinstance(E, LabelEmbedding):
        return np.asarray(E.matrix, dtype=np.float64)
    return np.asarray(E, dtype=np.float64)


def _class_labels(labels, num_classes, n, method) -> np.ndarray:
    if isinstance(labels, LabelEmbedding):
        if labels.task_kind != "single_label":
            raise UnsupportedTask(f"{method} supports single-label targets only")
        labels = np.argmax(labels.matrix, axis=1)
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != n:
        raise ValueError(f"labels must be a length-{n} vector")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == y.astype(np.int64)):
            raise ValueError("class indices must be integers")
    y = y.astype(np.int64)
    if y.min() < 0 or y.max() >= num_classes:
        raise ValueError(f"class index out of range [0, {num_classes})")
    return y


def _upper(D: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(D.shape[0], k=1)
    return D[iu]


def parc_score(features, label_embedding) -> float:
    """Spearman agreement between the feature-space and label-space pairwise
    correlation-distance structure of the probe set."""
    F = _feature_matrix(features, min_rows=3, min_cols=2)
    E = _embedding_matrix(label_embedding)
    if E.ndim != 2 or E.shape[0] != F.shape[0]:
        raise ValueError(
            f"shape mismatch: {F.shape[0]} feature rows vs {E.shape[0]} label rows"
        )
    if isinstance(label_embedding, LabelEmbedding):
        label_dist = embedding_distances(label_embedding)
    else:
        label_dist = correlation_distances(E)
    return spearman(_upper(correlation_distances(F)), _upper(label_dist))


def rsa_score(features, probe_features) -> float:
    """Spearman agreement between a model's and a probe model's pairwise
    correlation-distance matrices."""
    F = _feature_matrix(features, min_rows=3, min_cols=2)
    G = _feature_matrix(probe_features, "probe features", min_rows=3, min_cols=2)
    if F.shape[0] != G.shape[0]:
        raise ValueError(f"shape mismatch: {F.shape[0]} vs {G.shape[0]} rows")
    return spearman(_upper(correlation_distances(F)), _upper(correlation_distances(G)))


def dds_score(features, probe_features) -> float:
    """Pearson correlation of z-scored pairwise cosine distances against a
    probe model's. (The z-score step does not change the value; it is kept
    for parity with the method's published form.)"""
    F = _feature_matrix(features, min_rows=3, min_cols=1)
    G = _feature_matrix(probe_features, "probe features", min_rows=3, min_cols=1)
    if F.shape[0] != G.shape[0]:
        raise ValueError(f"shape mismatch: {F.shape[0]} vs {G.shape[0]} rows")
    a = zscore(_upper(cosine_distances(F)))
    b = zscore(_upper(cosine_distances(G)))
    return pearson(a, b)


def _prob_matrix(P) -> np.ndarray:
    M = np.asarray(P, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError("probabilities must be a non-empty 2-D matrix")
    sums = M.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-6)
    if bad.size:
        raise ValueError(f"row {int(bad[0])} is not normalized (sums to {sums[bad[0]]!r})")
    return M


def leep_score(probs, labels, num_classes: int) -> float:
    """Mean log-likelihood of the target labels under the empirical
    soft source-to-target class translator. Always <= 0."""
    P = _prob_matrix(probs)
    n = P.shape[0]
    y = _class_labels(labels, num_classes, n, "leep")
    joint = np.zeros((num_classes, P.shape[1]))
    np.add.at(joint, y, P)
    joint /= n
    pz = joint.sum(axis=0)
    cond = np.divide(joint, pz, out=np.zeros_like(joint), where=pz > 0)
    per_image = np.einsum("ij,ij->i", P, cond[y])
    return float(np.mean(np.log(per_image)))


def nce_score(probs, labels, num_classes: int) -> float:
    """Negative conditional entropy of target labels given hard source
    predictions (argmax, ties to the lowest index). Always <= 0."""
    P = _prob_matrix(probs)
    n = P.shape[0]
    y = _class_labels(labels, num_classes, n, "nce")
    zhat = np.argmax(P, axis=1)
    joint = np.zeros((P.shape[1], num_classes))
    np.add.at(joint, (zhat, y), 1.0)
    joint /= n
    pz = joint.sum(axis=1, keepdims=True)
    cond = np.divide(joint, pz, out=np.ones_like(joint), where=pz > 0)
    mask = joint > 0
    return float(np.sum(joint[mask] * np.log(cond[mask])))


def hscore(features, labels, num_classes: int) -> float:
    """trace(cov(F)^+ . cov_b(F)) where cov_b is the covariance of per-class
    mean features; higher means more class-discriminative features."""
    F = _feature_matrix(features, min_rows=2, min_cols=1)
    n, d = F.shape
    y = _class_labels(labels, num_classes, n, "hscore")
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if n < num_classes:
        raise ValueError(f"too few images: {n} rows for {num_classes} classes")
    counts = np.bincount(y, minlength=num_classes)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"missing class {int(missing[0])}: every class needs an example")
    Xc = F - F.mean(axis=0)
    cov = (Xc.T @ Xc) / n
    class_means = np.zeros((num_classes, d))
    for c in range(num_classes):
        class_means[c] = F[y == c].mean(axis=0)
    G = class_means[y]
    Gc = G - G.mean(axis=0)
    cov_b = (Gc.T @ Gc) / n
    return float(np.sum(pseudo_inverse(cov) * cov_b))


def _neighbor_order(F: np.ndarray, i: int) -> np.ndarray:
    diff = F - F[i]
    d2 = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((np.arange(F.shape[0]), d2))
    return order[order != i]


def knn_cv_score(features, labels, k: int = 1) -> float:
    """Leave-one-out k-NN score.

    Classification targets: fraction of correctly predicted probe images,
    with distance ties broken to the lowest index and majority ties to the
    tied class seen nearest. Multi-label and detection targets (passed as a
    LabelEmbedding): 1 minus the mean L1 distance to the nearest neighbor's
    label vector, normalized by the maximum possible L1 distance of 2.
    """
    F = _feature_matrix(features, min_rows=2, min_cols=1)
    n = F.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n - 1:
        raise ValueError(f"too few examples: k={k} needs at least {k + 1} images")
    if isinstance(labels, LabelEmbedding) and labels.task_kind != "single_label":
        E = np.asarray(labels.matrix, dtype=np.float64)
        if E.shape[0] != n:
            raise ValueError(f"labels must have {n} rows")
        total = 0.0
        for i in range(n):
            nn = _neighbor_order(F, i)[0]
            total += float(np.abs(E[i] - E[nn]).sum())
        return 1.0 - (total / n) / 2.0
    if isinstance(labels, LabelEmbedding):
        y = np.argmax(labels.matrix, axis=1).astype(np.int64)
    else:
        y = np.asarray(labels).astype(np.int64)
    if y.shape != (n,):
        raise ValueError(f"labels must be a length-{n} vector")
    correct = 0
    for i in range(n):
        votes = y[_neighbor_order(F, i)[:k]]
        counts = np.bincount(votes)
        best = counts.max()
        pred = next(int(c) for c in votes if counts[c] == best)
        correct += int(pred == y[i])
    return correct / n


def logistic_score(
    features,
    labels,
    num_classes: int,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-6,
) -> float:
    """Held-out accuracy of a multinomial logistic classifier.

    Stratified half split by ``seed`` (ceil(count/2) of each class trains),
    full-batch gradient descent on the softmax cross-entropy with an L2
    penalty of 1/n_train on the weights (not the intercept), step size from
    a power-iteration Lipschitz bound, at most ``max_iters`` steps or until
    the gradient infinity-norm drops below ``tol``. Emits DidNotConverge
    and still returns the final iterate's accuracy when the cap is hit.
    """
    F = _feature_matrix(features, min_rows=2, min_cols=1)
    n = F.shape[0]
    y = _class_labels(labels, num_classes, n, "logistic")
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    counts = np.bincount(y, minlength=num_classes)
    if counts.min() < 2 or n < 2 * num_classes:
        raise ValueError("too few examples: every class needs >= 2 images")
    rng = np.random.default_rng(seed)
    train_parts, eval_parts = [], []
    for c in range(num_classes):
        idx = rng.permutation(np.flatnonzero(y == c))
        cut = (idx.size + 1) // 2
        train_parts.append(idx[:cut])
        eval_parts.append(idx[cut:])
    train_idx = np.concatenate(train_parts)
    eval_idx = np.concatenate(eval_parts)

    ntr = train_idx.size
    Xtr = np.hstack([F[train_idx], np.ones((ntr, 1))])
    ytr = y[train_idx]
    lam = 1.0 / ntr

    v = np.full(Xtr.shape[1], 1.0 / math.sqrt(Xtr.shape[1]))
    for _ in range(50):
        w = Xtr.T @ (Xtr @ v)
        norm = float(np.sqrt(w @ w))
        if norm == 0.0:
            break
        v = w / norm
    sigma2 = float(np.einsum("i,i->", Xtr @ v, Xtr @ v))
    step = 1.0 / (1.2 * sigma2 / (2.0 * ntr) + lam)

    W = np.zeros((num_classes, Xtr.shape[1]))
    Y = np.zeros((ntr, num_classes))
    Y[np.arange(ntr), ytr] = 1.0
    converged = False
    for _ in range(max_iters):
        logits = Xtr @ W.T
        logits -= logits.max(axis=1, keepdims=True)
        expd = np.exp(logits)
        probs = expd / expd.sum(axis=1, keepdims=True)
        grad = (probs - Y).T @ Xtr / ntr
        grad[:, :-1] += lam * W[:, :-1]
        if float(np.max(np.abs(grad))) < tol:
            converged = True
            break
        W -= step * grad
    if not converged:
        warnings.warn(
            "gradient descent stopped at the iteration cap; returning the final iterate",
            DidNotConverge,
        )
    Xev = np.hstack([F[eval_idx], np.ones((eval_idx.size, 1))])
    pred = np.argmax(Xev @ W.T, axis=1)
    return float(np.mean(pred == y[eval_idx]))


def heuristic_score(depth_layers: int, source_size: int, target_size: int) -> float:
    """Depth plus log total data: more layers and more images predict a
    better transfer, with natural-log data scaling."""
    if depth_layers < 1:
        raise ValueError("depth must be at least 1 layer")
    if source_size < 1 or target_size < 1:
        raise ValueError("dataset sizes must be at least 1")
    return float(depth_layers) + math.log(source_size + target_size)
