"""Benchmark harness: probe-set sampling, the four correlation evaluation
modes, top-k relative accuracy, and the end-to-end scoring loop with
per-call timing.

Everything is deterministic given the master seed: probe seeds and
per-transfer seeds are derived by hashing, so results do not depend on the
worker count.
"""

from __future__ import annotations

import hashlib
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import methods as M
from .calibrate import ensemble_depth, normalize_features, reduce_features
from .embed import embed_detection, embed_multi_label, embed_single_label
from .errors import MissingArtifact, UnsupportedTask
from .stats import pearson
from .tensorio import BankManifest, load_labels, read_tensor

EVAL_MODES = (
    "varying_source",
    "varying_target",
    "varying_architecture",
    "varying_source_dataset",
)

TOPK_VALUES = (1, 3, 5)


def derive_seed(*parts) -> int:
    """Stable 64-bit seed hashed from the given parts (order-sensitive)."""
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


# --------------------------------------------------------------------------
# Probe sampling


@dataclass
class ProbeSet:
    target_id: str
    indices: list[int]
    n: int
    seed: int


def sample_probe(labels, task_kind: str, n: int, seed: int, target_id: str = "") -> ProbeSet:
    """Deterministically sample a probe set of at most ``n`` images.

    single_label: if 2C > n, keep floor(n/2) uniformly chosen classes; take
    2 images of every kept class; fill the remaining budget uniformly from
    the other images of kept classes. Other task kinds sample n images
    uniformly without replacement. Indices come back unique and sorted.
    """
    if n < 4:
        raise ValueError("budget too small: need n >= 4")
    rng = np.random.default_rng(seed)
    if task_kind == "single_label":
        y = np.asarray(labels, dtype=np.int64)
        if y.size == 0:
            raise ValueError("empty dataset")
        classes, counts = np.unique(y, return_counts=True)
        small = classes[counts < 2]
        if small.size:
            raise ValueError(
                f"class {int(small[0])} too small: has 1 image, need at least 2"
            )
        if 2 * classes.size > n:
            kept = np.sort(rng.choice(classes, size=n // 2, replace=False))
        else:
            kept = classes
        chosen: list[int] = []
        for c in kept:
            pool = np.flatnonzero(y == c)
            chosen.extend(int(i) for i in rng.choice(pool, size=2, replace=False))
        budget = n - len(chosen)
        if budget > 0:
            taken = set(chosen)
            rest = np.asarray(
                [int(i) for c in kept for i in np.flatnonzero(y == c) if int(i) not in taken],
                dtype=np.int64,
            )
            if rest.size:
                extra = rng.choice(rest, size=min(budget, rest.size), replace=False)
                chosen.extend(int(i) for i in extra)
        indices = sorted(chosen)
    else:
        total = len(labels)
        if total == 0:
            raise ValueError("empty dataset")
        take = min(n, total)
        indices = sorted(int(i) for i in rng.choice(total, size=take, replace=False))
    return ProbeSet(target_id=target_id, indices=indices, n=n, seed=seed)


# --------------------------------------------------------------------------
# Correlation metrics


def correlation_groups(keys, mode: str, models=None) -> list[tuple[str, list]]:
    """Group (model_id, target_id) keys into the sets one mode correlates
    over; returns (group label, keys) pairs in deterministic order."""
    if mode not in EVAL_MODES:
        raise ValueError(f"unknown evaluation mode '{mode}'")
    keys = sorted(set(keys))
    groups: list[tuple[str, list]] = []
    if mode == "varying_source":
        for t in sorted({t for _, t in keys}):
            groups.append((t, [k for k in keys if k[1] == t]))
    elif mode == "varying_target":
        for s in sorted({s for s, _ in keys}):
            groups.append((s, [k for k in keys if k[0] == s]))
    else:
        if models is None:
            raise ValueError(f"mode '{mode}' needs model metadata")
        meta = {m.model_id: m for m in models}
        # hold the other factor fixed inside each correlated group
        attr = "source_dataset" if mode == "varying_architecture" else "architecture"
        for t in sorted({t for _, t in keys}):
            tkeys = [k for k in keys if k[1] == t]
            for value in sorted({getattr(meta[s], attr) for s, _ in tkeys}):
                group = [k for k in tkeys if getattr(meta[k[0]], attr) == value]
                groups.append((f"{t}/{attr}={value}", group))
    return groups


def _group_pc(group_keys, scores, outcomes) -> float:
    xs = [scores[k] for k in group_keys]
    ys = [outcomes[k] for k in group_keys]
    return 100.0 * pearson(xs, ys)


def mean_pc(scores: dict, outcomes: dict, mode: str, models=None):
    """Per-group and mean Pearson correlation, in percent.

    ``scores`` and ``outcomes`` are keyed by (model_id, target_id) and must
    cover identical keys; every correlated group needs at least 2 entries.
    Returns (per_group, mean).
    """
    if set(scores) != set(outcomes):
        raise ValueError("key mismatch between scores and outcomes")
    per_group: dict[str, float] = {}
    for label, group in correlation_groups(scores.keys(), mode, models):
        if len(group) < 2:
            raise ValueError(f"group '{label}' too small: {len(group)} transfer(s), need 2")
        per_group[label] = _group_pc(group, scores, outcomes)
    return per_group, float(np.mean(list(per_group.values())))


def topk_relative_accuracy(scores: dict, outcomes: dict, k: int) -> float:
    """Mean outcome of the k top-scored models over the best model's outcome.

    Score ties rank the lexicographically lower model id first.
    """
    if not scores:
        raise ValueError("empty bank")
    if set(scores) != set(outcomes):
        raise ValueError("key mismatch between scores and outcomes")
    if k < 1 or k > len(scores):
        raise ValueError(f"k={k} out of range for {len(scores)} models")
    best = max(outcomes.values())
    if best <= 0:
        raise ValueError("best outcome must be positive")
    order = sorted(scores, key=lambda s: (-scores[s], s))
    return float(np.mean([outcomes[s] for s in order[:k]]) / best)


# --------------------------------------------------------------------------
# Reports


@dataclass
class MethodReport:
    per_target: dict[str, tuple[float, float]]  # group label -> (mean, std) in percent
    mean_pc: tuple[float, float]
    topk: dict[int, float]
    timing_ms: tuple[float, float]


@dataclass
class EvalReport:
    mode: str
    n: int
    seeds: list[int]
    methods: dict[str, MethodReport]
    skipped: list[dict]
    records: list = field(default_factory=list, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "seeds": list(self.seeds),
            "methods": {
                name: {
                    "per_target": {
                        g: {"mean": m, "std": s} for g, (m, s) in rep.per_target.items()
                    },
                    "mean_pc": {"mean": rep.mean_pc[0], "std": rep.mean_pc[1]},
                    "topk": {str(k): v for k, v in rep.topk.items()},
                    "timing_ms": {"mean": rep.timing_ms[0], "std": rep.timing_ms[1]},
                }
                for name, rep in self.methods.items()
            },
            "skipped": list(self.skipped),
        }

    def summary_table(self) -> str:
        lines = [f"{'Method':<22} {'Mean PC (%)':>16} {'Time (ms)':>18}"]
        for name, rep in self.methods.items():
            pc = f"{rep.mean_pc[0]:.1f} ± {rep.mean_pc[1]:.1f}"
            tm = f"{rep.timing_ms[0]:.1f} ± {rep.timing_ms[1]:.1f}"
            lines.append(f"{name:<22} {pc:>16} {tm:>18}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        groups = sorted({g for rep in self.methods.values() for g in rep.per_target})
        lines = ["method," + ",".join(groups) + ",mean_pc"]
        for name, rep in self.methods.items():
            cells = [
                f"{rep.per_target[g][0]:.1f}" if g in rep.per_target else "" for g in groups
            ]
            lines.append(f"{name}," + ",".join(cells) + f",{rep.mean_pc[0]:.1f}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# End-to-end benchmark


class _TensorCache:
    def __init__(self, base_dir):
        self.base_dir = base_dir
        self._lock = threading.Lock()
        self._data: dict[str, np.ndarray] = {}

    def get(self, rel: str) -> np.ndarray:
        with self._lock:
            arr = self._data.get(rel)
        if arr is not None:
            return arr
        path = self.base_dir / rel
        arr = read_tensor(path)
        with self._lock:
            self._data.setdefault(rel, arr)
        return arr


def _dense_single_labels(y_full: np.ndarray, idx: np.ndarray):
    """Probe labels remapped to the dense range of classes actually present.

    Class subsampling can drop classes from the probe, and every scorer
    should see only the classes it was given examples of.
    """
    sub = y_full[idx]
    present = np.unique(sub)
    return np.searchsorted(present, sub), int(present.size)


def _calibrated(F: np.ndarray, cfg: M.MethodConfig) -> np.ndarray:
    if cfg.normalize:
        F = normalize_features(F)
    if cfg.pca_dim is not None:
        F = reduce_features(F, cfg.pca_dim)
    return F


def _score_transfer(cfg, label, manifest, cache, labels_by_target, probe, s, t, seed):
    """Score one (method, model, target) transfer; returns a ScoreRecord.

    Only the calibration + scoring computation is timed; file access and
    label embedding happen outside the clock.
    """
    target = manifest.target(t)
    kind = target.task_kind
    if cfg.method == "heuristic":
        model = manifest.model(s)
        t0 = time.perf_counter()
        raw = M.heuristic_score(
            model.depth_layers, model.source_dataset_size, target.target_dataset_size
        )
        ms = (time.perf_counter() - t0) * 1e3
        return M.ScoreRecord(label, s, t, raw, None, ms)

    idx = np.asarray(probe.indices, dtype=np.int64)
    art = manifest.artifacts.get((s, t))
    if cfg.method in M.PROB_METHODS:
        if kind != "single_label":
            raise UnsupportedTask(f"{cfg.method} supports single-label targets only")
        if art is None or art.prob_path is None:
            raise MissingArtifact(f"no probability artifact for ({s}, {t})")
        P = cache.get(art.prob_path)[idx].astype(np.float64)
        y, c_eff = _dense_single_labels(labels_by_target[t], idx)
        fn = M.leep_score if cfg.method == "leep" else M.nce_score
        t0 = time.perf_counter()
        raw = fn(P, y, c_eff)
        ms = (time.perf_counter() - t0) * 1e3
        return M.ScoreRecord(label, s, t, raw, None, ms)

    if art is None:
        raise MissingArtifact(f"no feature artifact for ({s}, {t})")
    F = cache.get(art.feature_path)[idx].astype(np.float64)

    if cfg.method in ("rsa", "dds"):
        if not cfg.probe_model_id:
            raise MissingArtifact(f"{cfg.method} needs probe_model_id to locate probe features")
        part = manifest.artifacts.get((cfg.probe_model_id, t))
        if part is None:
            raise MissingArtifact(f"no feature artifact for probe model ({cfg.probe_model_id}, {t})")
        G = cache.get(part.feature_path)[idx].astype(np.float64)
        fn = M.rsa_score if cfg.method == "rsa" else M.dds_score
        t0 = time.perf_counter()
        raw = fn(_calibrated(F, cfg), _calibrated(G, cfg))
        ms = (time.perf_counter() - t0) * 1e3
        return M.ScoreRecord(label, s, t, raw, None, ms)

    if kind == "single_label":
        y, c_eff = _dense_single_labels(labels_by_target[t], idx)
        embedding = embed_single_label(y, c_eff) if cfg.method == "parc" else None
    else:
        if cfg.method in ("hscore", "logistic"):
            raise UnsupportedTask(f"{cfg.method} supports single-label targets only")
        subset = [labels_by_target[t][int(i)] for i in idx]
        if kind == "multi_label":
            embedding = embed_multi_label(subset, target.num_classes)
        else:
            embedding = embed_detection(subset, target.num_classes)

    if cfg.method == "parc":
        t0 = time.perf_counter()
        raw = M.parc_score(_calibrated(F, cfg), embedding)
    elif cfg.method == "knn_cv":
        arg = y if kind == "single_label" else embedding
        t0 = time.perf_counter()
        raw = M.knn_cv_score(_calibrated(F, cfg), arg, cfg.k)
    elif cfg.method == "hscore":
        t0 = time.perf_counter()
        raw = M.hscore(_calibrated(F, cfg), y, c_eff)
    elif cfg.method == "logistic":
        t0 = time.perf_counter()
        raw = M.logistic_score(_calibrated(F, cfg), y, c_eff, seed=seed)
    else:
        raise ValueError(f"unknown method '{cfg.method}'")
    ms = (time.perf_counter() - t0) * 1e3
    return M.ScoreRecord(label, s, t, raw, None, ms)


def _mean_std(values) -> tuple[float, float]:
    a = np.asarray(list(values), dtype=np.float64)
    if a.size == 0:
        return float("nan"), float("nan")
    return float(a.mean()), float(a.std())


def run_benchmark(
    manifest: BankManifest,
    method_configs,
    n: int = 500,
    num_probe_seeds: int = 5,
    mode: str = "varying_source",
    master_seed: int = 0,
    jobs: int = 1,
) -> EvalReport:
    """Score every configured method on every transfer with outcomes, over
    ``num_probe_seeds`` independently sampled probe sets, and correlate the
    scores against ground-truth accuracies.

    Per-transfer scorer failures are recorded in ``skipped`` and drop every
    correlation group they touch rather than biasing it. Deterministic
    given ``master_seed`` regardless of ``jobs``.
    """
    if mode not in EVAL_MODES:
        raise ValueError(f"unknown evaluation mode '{mode}'")
    if num_probe_seeds < 1:
        raise ValueError("need at least 1 probe seed")
    pairs = sorted({(o.model_id, o.target_id) for o in manifest.outcomes})
    if not pairs:
        raise ValueError("empty bank: manifest has no outcomes")
    outcomes = {(o.model_id, o.target_id): o.accuracy for o in manifest.outcomes}
    full_groups = correlation_groups(pairs, mode, manifest.models)
    for label_g, group in full_groups:
        if len(group) < 2:
            raise ValueError(f"group '{label_g}' too small: {len(group)} transfer(s), need 2")

    labels = {
        tm.target_id: load_labels(
            manifest.resolve(manifest.labels[tm.target_id]), tm.task_kind, tm.num_classes
        )[1]
        for tm in manifest.targets
    }
    cache = _TensorCache(manifest.base_dir)

    # one label per config: the method name, suffixed when a method repeats
    counts: dict[str, int] = {}
    for cfg in method_configs:
        counts[cfg.method] = counts.get(cfg.method, 0) + 1
    seen: dict[str, int] = {}
    labelled: list[tuple[str, M.MethodConfig]] = []
    for cfg in method_configs:
        seen[cfg.method] = seen.get(cfg.method, 0) + 1
        if counts[cfg.method] > 1:
            labelled.append((f"{cfg.method}#{seen[cfg.method]}", cfg))
        else:
            labelled.append((cfg.method, cfg))

    probe_seeds = [derive_seed(master_seed, "probe", r) for r in range(num_probe_seeds)]
    probes = {
        (r, tm.target_id): sample_probe(
            labels[tm.target_id],
            tm.task_kind,
            n,
            derive_seed(probe_seeds[r], tm.target_id),
            tm.target_id,
        )
        for r in range(num_probe_seeds)
        for tm in manifest.targets
    }

    tasks = [
        (label, cfg, r, s, t)
        for label, cfg in labelled
        for r in range(num_probe_seeds)
        for (s, t) in pairs
    ]

    def run_task(task):
        label, cfg, r, s, t = task
        seed = derive_seed(master_seed, cfg.method, s, t)
        try:
            rec = _score_transfer(
                cfg, label, manifest, cache, labels, probes[(r, t)], s, t, seed
            )
            return (label, cfg, r, s, t, rec, None)
        except (MissingArtifact, UnsupportedTask, ValueError) as exc:
            kind = (
                "missing_artifact"
                if isinstance(exc, MissingArtifact)
                else "unsupported_task"
                if isinstance(exc, UnsupportedTask)
                else "scorer_error"
            )
            return (label, cfg, r, s, t, None, {"kind": kind, "reason": str(exc)})

    if jobs > 1:
        # artifacts are preloaded serially so worker threads only compute
        for label, cfg, r, s, t in tasks:
            art = manifest.artifacts.get((s, t))
            if art is not None and cfg.method != "heuristic":
                rel = art.prob_path if cfg.method in M.PROB_METHODS else art.feature_path
                if rel:
                    cache.get(rel)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_task, tasks))
    else:
        results = [run_task(task) for task in tasks]

    records: dict[tuple[str, int], dict] = {}
    skipped: list[dict] = []
    for label, cfg, r, s, t, rec, skip in results:
        if rec is not None:
            records.setdefault((label, r), {})[(s, t)] = rec
        else:
            skipped.append(
                {"method": label, "seed_index": r, "model_id": s, "target_id": t, **skip}
            )

    depths = {m.model_id: m.depth_layers for m in manifest.models}
    reports: dict[str, MethodReport] = {}
    all_records: list = []
    for label, cfg in labelled:
        per_group_series: dict[str, list[float]] = {}
        mean_series: list[float] = []
        topk_series: dict[int, list[float]] = {k: [] for k in TOPK_VALUES}
        times: list[float] = []
        for r in range(num_probe_seeds):
            recs = records.get((label, r), {})
            times.extend(rec.wall_time_ms for rec in recs.values())
            all_records.extend(recs.values())
            eval_scores: dict[tuple[str, str], float] = {}
            if cfg.ensemble != "none":
                for t in sorted({t for _, t in recs}):
                    raw = {s: recs[(s, t)].raw_score for (s, tt) in recs if tt == t}
                    cal = ensemble_depth(raw, depths, cfg.ell_max, cfg.ensemble, cfg.lambda_ell)
                    for s, v in cal.items():
                        recs[(s, t)].calibrated_score = v
                        eval_scores[(s, t)] = v
            else:
                eval_scores = {k: rec.raw_score for k, rec in recs.items()}
            ok_keys = set(eval_scores)
            kept = [
                (g_label, group)
                for g_label, group in full_groups
                if all(k in ok_keys for k in group)
            ]
            if kept:
                pcs = {
                    g_label: _group_pc(group, eval_scores, outcomes)
                    for g_label, group in kept
                }
                for g_label, value in pcs.items():
                    per_group_series.setdefault(g_label, []).append(value)
                mean_series.append(float(np.mean(list(pcs.values()))))
            for k in TOPK_VALUES:
                vals = []
                for t in sorted({t for _, t in pairs}):
                    tkeys = [key for key in pairs if key[1] == t]
                    if any(key not in ok_keys for key in tkeys) or k > len(tkeys):
                        continue
                    vals.append(
                        topk_relative_accuracy(
                            {s: eval_scores[(s, t)] for s, _ in tkeys},
                            {s: outcomes[(s, t)] for s, _ in tkeys},
                            k,
                        )
                    )
                if vals:
                    topk_series[k].append(float(np.mean(vals)))
        reports[label] = MethodReport(
            per_target={g: _mean_std(v) for g, v in sorted(per_group_series.items())},
            mean_pc=_mean_std(mean_series),
            topk={k: float(np.mean(v)) for k, v in topk_series.items() if v},
            timing_ms=_mean_std(times),
        )

    return EvalReport(
        mode=mode,
        n=n,
        seeds=probe_seeds,
        methods=reports,
        skipped=skipped,
        records=all_records,
    )
