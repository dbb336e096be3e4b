"""Shared fixtures: synthetic banks whose ground-truth outcomes are defined
from brute-force oracle scores, plus small random-instance generators."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from modelpick.tensorio import write_tensor  # noqa: E402

MODEL_DEPTHS = [18, 18, 26, 26, 34, 34, 50, 50]
MODEL_ARCHS = ["alexish", "googlish", "alexish", "res18ish", "googlish", "res18ish", "res50ish", "res50ish"]
MODEL_SOURCES = ["src_a", "src_b", "src_b", "src_a", "src_a", "src_b", "src_a", "src_b"]


def build_oracle_bank(root: Path, num_models: int = 8, seed: int = 123):
    """Write a complete bank whose outcomes are an affine map of brute-force
    PARC scores.

    Every target dataset is small enough that a probe budget of 500 always
    selects the whole dataset, so scores cannot depend on the probe seed.
    Returns (manifest path, {(model, target): oracle PARC score}).
    """
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    (root / "tensors").mkdir(exist_ok=True)
    (root / "labels").mkdir(exist_ok=True)

    targets = [
        {"target_id": "t_birds", "num_classes": 4, "per_class": 5},
        {"target_id": "t_pets", "num_classes": 5, "per_class": 4},
        {"target_id": "t_misc", "num_classes": 6, "per_class": 4},
    ]
    models = []
    for j in range(num_models):
        models.append(
            {
                "model_id": f"m{j:02d}",
                "depth_layers": MODEL_DEPTHS[j % len(MODEL_DEPTHS)],
                "source_dataset_size": 5000 + 1000 * j,
                "architecture": MODEL_ARCHS[j % len(MODEL_ARCHS)],
                "source_dataset": MODEL_SOURCES[j % len(MODEL_SOURCES)],
                "pretext_task": "classification",
            }
        )

    artifacts: dict = {}
    outcomes = []
    labels_map = {}
    oracle_scores = {}
    target_entries = []
    for tspec in targets:
        tid = tspec["target_id"]
        classes = tspec["num_classes"]
        y = np.repeat(np.arange(classes), tspec["per_class"])
        n = y.size
        label_path = f"labels/{tid}.json"
        (root / label_path).write_text(json.dumps([int(v) for v in y]))
        labels_map[tid] = label_path
        target_entries.append(
            {
                "target_id": tid,
                "target_dataset_size": int(n),
                "task_kind": "single_label",
                "num_classes": classes,
            }
        )
        onehot = np.zeros((n, classes))
        onehot[np.arange(n), y] = 1.0
        for j, model in enumerate(models):
            mid = model["model_id"]
            d = 12 + 2 * j
            mix = j / max(1, num_models - 1)
            proto = rng.normal(size=(classes, d))
            signal = onehot @ proto
            noise = rng.normal(size=(n, d))
            # continuous features throughout: exact pairwise ties would make
            # the rank statistics sensitive to last-ulp summation order
            F = (1.0 - mix) * signal + (0.1 + 1.3 * mix) * noise
            feat_path = f"tensors/{mid}_{tid}.ptns"
            write_tensor(F, root / feat_path)
            artifacts.setdefault(mid, {})[tid] = {"feature_path": feat_path}
            score = oracles.parc_single_label(F, y, classes)
            oracle_scores[(mid, tid)] = score
            outcomes.append(
                {"model_id": mid, "target_id": tid, "accuracy": (score + 1.0) / 2.0}
            )

    manifest = {
        "models": models,
        "targets": target_entries,
        "artifacts": artifacts,
        "outcomes": outcomes,
        "labels": labels_map,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path, oracle_scores


@pytest.fixture(scope="session")
def oracle_bank(tmp_path_factory):
    root = tmp_path_factory.mktemp("oracle_bank")
    return build_oracle_bank(root)


def random_classification_instance(rng, n_range=(4, 20), d_range=(2, 16), c_range=(2, 5)):
    """Random features plus labels with every class appearing at least twice
    (so every scorer's preconditions hold)."""
    c = int(rng.integers(c_range[0], c_range[1] + 1))
    n_lo = max(n_range[0], 2 * c)
    n = int(rng.integers(n_lo, n_range[1] + 1))
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    y = np.concatenate([np.repeat(np.arange(c), 2), rng.integers(0, c, size=n - 2 * c)])
    y = y[rng.permutation(n)]
    F = rng.normal(size=(n, d))
    return F, y.astype(np.int64), c


def random_prob_matrix(rng, n, z):
    P = rng.gamma(1.0, 1.0, size=(n, z))
    return P / P.sum(axis=1, keepdims=True)
