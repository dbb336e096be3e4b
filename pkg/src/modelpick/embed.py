"""Vector embeddings of target annotations.

Each embedding maps the n probe annotations to an n x C matrix, one row per
image, so that label-side pairwise distances can be compared against
feature-side ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LabelEmbedding:
    matrix: np.ndarray  # (n, C) float64
    task_kind: str


def _class_indices(labels, num_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValueError("expected a 1-D sequence of class indices")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == y.astype(np.int64)):
            raise ValueError("class indices must be integers")
        y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise ValueError(f"class index out of range [0, {num_classes})")
    return y.astype(np.int64)


def embed_single_label(labels, num_classes: int) -> LabelEmbedding:
    """One-hot rows."""
    if num_classes < 2:
        raise ValueError("single-label embedding needs at least 2 classes")
    y = _class_indices(labels, num_classes)
    m = np.zeros((y.size, num_classes), dtype=np.float64)
    m[np.arange(y.size), y] = 1.0
    return LabelEmbedding(m, "single_label")


def embed_multi_label(label_sets, num_classes: int) -> LabelEmbedding:
    """Multi-hot binary rows, one per image; every image needs >= 1 label."""
    if num_classes < 1:
        raise ValueError("need at least 1 class")
    m = np.zeros((len(label_sets), num_classes), dtype=np.float64)
    for i, labels in enumerate(label_sets):
        idx = list(labels)
        if not idx:
            raise ValueError(f"empty label set at image {i}")
        y = _class_indices(idx, num_classes)
        m[i, y] = 1.0
    return LabelEmbedding(m, "multi_label")


def embed_detection(images, num_classes: int) -> LabelEmbedding:
    """Per-class box-area fractions.

    ``images`` holds one sequence of ``(class, x1, y1, x2, y2)`` boxes per
    image. Row c = total area of class-c boxes / total area of all boxes, so
    rows sum to 1; an image with no boxes embeds to the zero row. Overlaps
    are summed, not rasterized.
    """
    if num_classes < 1:
        raise ValueError("need at least 1 class")
    m = np.zeros((len(images), num_classes), dtype=np.float64)
    for i, boxes in enumerate(images):
        total = 0.0
        for b, box in enumerate(boxes):
            cls, x1, y1, x2, y2 = box
            if not 0 <= int(cls) < num_classes:
                raise ValueError(f"image {i}, box {b}: class index out of range")
            if not (x2 > x1 and y2 > y1):
                raise ValueError(f"image {i}, box {b}: degenerate box")
            area = float(x2 - x1) * float(y2 - y1)
            m[i, int(cls)] += area
            total += area
        if total > 0.0:
            m[i] /= total
    return LabelEmbedding(m, "detection")


def embed_labels(labels, task_kind: str, num_classes: int) -> LabelEmbedding:
    """Dispatch to the embedding for the given task kind."""
    if task_kind == "single_label":
        return embed_single_label(labels, num_classes)
    if task_kind == "multi_label":
        return embed_multi_label(labels, num_classes)
    if task_kind == "detection":
        return embed_detection(labels, num_classes)
    raise ValueError(f"unknown task kind '{task_kind}'")


def embedding_distances(embedding: LabelEmbedding) -> np.ndarray:
    """Pairwise correlation distances between embedding rows.

    For one-hot rows the matrix has the closed form 0 (same class) or
    C/(C-1) (different class), since distinct one-hots correlate at
    -1/(C-1); computing it directly keeps the ties exact, which rank
    correlations downstream are sensitive to. Other embeddings go through
    the generic row-correlation kernel.
    """
    from .stats import correlation_distances  # local import to avoid a cycle

    if embedding.task_kind == "single_label":
        y = np.argmax(embedding.matrix, axis=1)
        classes = embedding.matrix.shape[1]
        cross = classes / (classes - 1)
        return np.where(y[:, None] == y[None, :], 0.0, cross)
    return correlation_distances(embedding.matrix)


def label_l1_distance(embedding) -> np.ndarray:
    """All-pairs L1 distance between embedding rows (a metric on rows)."""
    E = embedding.matrix if isinstance(embedding, LabelEmbedding) else np.asarray(embedding, np.float64)
    if E.ndim != 2:
        raise ValueError("expected a 2-D embedding matrix")
    n = E.shape[0]
    if n < 2:
        raise ValueError("too few rows: need at least 2")
    D = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        D[i] = np.abs(E - E[i]).sum(axis=1)
    return D
