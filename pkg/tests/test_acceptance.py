"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Tolerances are pinned here and nowhere else.
"""

import json
import math
import struct
import time
import warnings

import numpy as np
import pytest

import oracles
from conftest import build_oracle_bank, random_classification_instance, random_prob_matrix
from modelpick.bench import run_benchmark, sample_probe
from modelpick.calibrate import ensemble_depth, reduce_features
from modelpick.cli import main as cli_main
from modelpick.embed import embed_detection, embed_single_label, embedding_distances
from modelpick.errors import (
    BadMagic,
    DidNotConverge,
    InvalidShape,
    NonFiniteValue,
    TensorFormatError,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedVersion,
)
from modelpick.methods import (
    MethodConfig,
    dds_score,
    heuristic_score,
    hscore,
    knn_cv_score,
    leep_score,
    nce_score,
    parc_score,
    rsa_score,
)
from modelpick.stats import cosine_distances, pearson, spearman
from modelpick.tensorio import load_manifest, read_tensor, write_tensor


def _announce(name):
    print(f"\nACCEPTANCE {name}: PASS")


def test_oracle_equivalence_on_random_small_instances():
    """parc/rsa/dds/leep/nce/hscore/knn_cv vs brute force, 100+ instances."""
    rng = np.random.default_rng(20250809)
    start = time.perf_counter()
    instances = 0
    while instances < 100:
        F, y, c = random_classification_instance(rng, n_range=(4, 20), d_range=(2, 16), c_range=(2, 5))
        n = F.shape[0]
        emb = embed_single_label(y, c)

        assert parc_score(F, emb) == pytest.approx(
            oracles.parc_single_label(F, y, c), abs=1e-10
        )

        G = rng.normal(size=(n, int(rng.integers(2, 17))))
        assert rsa_score(F, G) == pytest.approx(oracles.rsa(F, G), abs=1e-10)
        assert dds_score(F, G) == pytest.approx(oracles.dds(F, G), abs=1e-10)

        P = random_prob_matrix(rng, n, int(rng.integers(2, 7)))
        assert leep_score(P, y, c) == pytest.approx(oracles.leep(P, y, c), abs=1e-10)
        assert nce_score(P, y, c) == pytest.approx(oracles.nce(P, y, c), abs=1e-10)

        assert hscore(F, y, c) == pytest.approx(oracles.hscore(F, y, c), abs=1e-7)

        k = int(rng.integers(1, 4))
        assert knn_cv_score(F, y, k) == pytest.approx(oracles.knn_cv(F, y, k), abs=1e-10)

        instances += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"oracle suite took {elapsed:.1f}s, budget is 60s"
    _announce(f"oracle equivalence ({instances} instances, {elapsed:.1f}s)")


def test_invariance_suite():
    rng = np.random.default_rng(7)

    # PARC / RSA: per-image positive-affine feature transforms
    F = rng.normal(size=(12, 8))
    y = rng.permutation(np.arange(12) % 3)
    emb = embed_single_label(y, 3)
    scales = rng.uniform(0.2, 5.0, size=(12, 1))
    shifts = rng.normal(size=(12, 1))
    assert abs(parc_score(F * scales + shifts, emb) - parc_score(F, emb)) <= 1e-9
    G = rng.normal(size=(12, 6))
    assert abs(rsa_score(F * scales + shifts, G) - rsa_score(F, G)) <= 1e-9

    # DDS: the z-score step must not change the value
    iu = np.triu_indices(12, 1)
    plain = pearson(cosine_distances(F)[iu], cosine_distances(G)[iu])
    assert abs(dds_score(F, G) - plain) <= 1e-12

    # depth ensemble: invariant to positive-affine raw-score transforms
    raw = {f"m{i}": float(v) for i, v in enumerate(rng.normal(size=8))}
    depths = {f"m{i}": int(d) for i, d in enumerate(rng.integers(10, 51, size=8))}
    base = ensemble_depth(raw, depths, ell_max=50, variant="znorm_plus_depth")
    shifted = ensemble_depth(
        {k: 2.5 * v + 7.0 for k, v in raw.items()}, depths, ell_max=50, variant="znorm_plus_depth"
    )
    for key in raw:
        assert abs(base[key] - shifted[key]) <= 1e-10

    # spearman: invariant under a strictly monotone increasing transform
    x = rng.normal(size=25)
    z = rng.normal(size=25)
    assert abs(spearman(x**3 + 2.0 * x, z) - spearman(x, z)) <= 1e-12

    # PCA lossless-rotation case leaves PARC unchanged
    F2 = rng.normal(size=(12, 6))
    reduced = reduce_features(F2, 10)  # covers every principal direction
    assert abs(parc_score(reduced, emb) - parc_score(F2, emb)) <= 1e-9

    _announce("invariance suite")


def test_closed_form_fixtures():
    # one-hot label distances take exactly the two closed-form values
    for classes in (2, 3, 4, 5):
        y = np.arange(2 * classes) % classes
        D = embedding_distances(embed_single_label(y, classes))
        same = y[:, None] == y[None, :]
        assert np.all(D[same] == 0.0)
        assert set(D[~same].tolist()) == {classes / (classes - 1)}

    # 1-D two-cluster H-score
    assert hscore(np.array([[0.0], [0.0], [1.0], [1.0]]), [0, 0, 1, 1], 2) == pytest.approx(
        1.0, abs=1e-12
    )

    # perfectly aligned source predictions
    assert leep_score([[1.0, 0.0], [0.0, 1.0]], [0, 1], 2) == 0.0
    assert nce_score([[1.0, 0.0], [0.0, 1.0]], [0, 1], 2) == 0.0

    # depth-plus-log-data heuristic
    assert heuristic_score(50, 10000, 5000) == pytest.approx(
        50.0 + math.log(15000.0), abs=1e-9
    )

    # detection embedding area fractions
    row = embed_detection([[(0, 0.0, 0.0, 20.0, 50.0), (1, 0.0, 0.0, 50.0, 60.0)]], 2).matrix[0]
    assert row.tolist() == [0.25, 0.75]

    _announce("closed-form fixtures")


def test_end_to_end_oracle_benchmark(tmp_path, capsys):
    start = time.perf_counter()
    manifest_path, _ = build_oracle_bank(tmp_path / "bank", num_models=8)
    out_path = tmp_path / "report.json"
    code = cli_main(
        [
            "evaluate",
            "--manifest", str(manifest_path),
            "--methods", "parc,heuristic",
            "--mode", "varying_source",
            "--n", "500",
            "--probes", "5",
            "--seed", "0",
            "--jobs", "1",
            "--out", str(out_path),
        ]
    )
    err = capsys.readouterr().err
    assert code == 0
    report = json.loads(out_path.read_text())
    parc = report["methods"]["parc"]
    assert parc["mean_pc"]["mean"] == pytest.approx(100.0, abs=1e-9)
    assert parc["mean_pc"]["std"] == 0.0
    assert "100.0 ± 0.0" in err
    # the heuristic never looks at the probe, so its spread over seeds is 0
    assert report["methods"]["heuristic"]["mean_pc"]["std"] == 0.0
    assert len(report["seeds"]) == 5
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0, f"end-to-end run took {elapsed:.1f}s, budget is 120s"
    _announce(f"end-to-end oracle benchmark ({elapsed:.1f}s)")


def _parc_f32_time(rng, n, d=1024, reps=2):
    F = rng.normal(size=(n, d))
    y = np.arange(n) % 10
    emb = embed_single_label(y, 10)
    best = math.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        parc_score(reduce_features(F, 32), emb)
        best = min(best, time.perf_counter() - t0)
    return best


def test_scale_and_timing():
    rng = np.random.default_rng(99)
    t500 = _parc_f32_time(rng, 500)
    assert t500 < 5.0, f"PARC f=32 on 500x1024 took {t500:.2f}s, budget is 5s"
    t250 = _parc_f32_time(rng, 250)
    t1000 = _parc_f32_time(rng, 1000)
    assert t1000 >= t250, f"probe-size cost not monotone: {t1000:.3f}s < {t250:.3f}s"
    _announce(
        f"scale/timing (n=500: {t500*1e3:.0f}ms, n=250: {t250*1e3:.0f}ms, n=1000: {t1000*1e3:.0f}ms)"
    )


def test_probe_sampling_scenarios(tmp_path):
    # scenario: 10 classes x 100 images, budget 500
    y_small = np.repeat(np.arange(10), 100)
    for seed in range(20):
        probe = sample_probe(y_small, "single_label", 500, seed=seed)
        idx = np.asarray(probe.indices)
        assert idx.size == 500
        assert np.unique(idx).size == 500
        counts = np.bincount(y_small[idx], minlength=10)
        assert np.count_nonzero(counts) == 10
        assert counts.min() >= 2

    # scenario: 400 classes x 10 images, budget 500 -> 250 kept classes x 2
    y_large = np.repeat(np.arange(400), 10)
    for seed in range(20):
        probe = sample_probe(y_large, "single_label", 500, seed=seed)
        idx = np.asarray(probe.indices)
        assert idx.size == 500
        counts = np.bincount(y_large[idx], minlength=400)
        kept = np.flatnonzero(counts)
        assert kept.size == 250
        assert np.all(counts[kept] == 2)

    # bit-exact determinism across repeated runs and across worker counts
    for seed in range(20):
        a = sample_probe(y_small, "single_label", 500, seed=seed)
        b = sample_probe(y_small, "single_label", 500, seed=seed)
        assert a.indices == b.indices
    manifest_path, _ = build_oracle_bank(tmp_path / "bank")
    manifest = load_manifest(manifest_path)
    configs = [MethodConfig(method="parc"), MethodConfig(method="knn_cv")]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DidNotConverge)
        r1 = run_benchmark(manifest, configs, n=18, num_probe_seeds=3, master_seed=5, jobs=1)
        r2 = run_benchmark(manifest, configs, n=18, num_probe_seeds=3, master_seed=5, jobs=4)
    key1 = [(rec.method, rec.model_id, rec.target_id, rec.raw_score) for rec in r1.records]
    key2 = [(rec.method, rec.model_id, rec.target_id, rec.raw_score) for rec in r2.records]
    assert key1 == key2
    assert r1.seeds == r2.seeds

    _announce("probe sampling")


def test_format_conformance(tmp_path):
    rng = np.random.default_rng(2024)
    path = tmp_path / "t.ptns"
    for i in range(1000):
        dtype = np.float32 if i % 2 else np.float64
        if i % 3 == 0:
            shape = (int(rng.integers(1, 9)),)
        else:
            shape = (int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        arr = rng.normal(scale=10.0 ** rng.integers(-3, 4), size=shape).astype(dtype)
        write_tensor(arr, path)
        got = read_tensor(path)
        assert got.dtype == arr.dtype
        assert got.shape == arr.shape
        assert got.tobytes() == arr.tobytes()

    # corrupted corpus: named errors only, never another exception
    good = (
        b"PTNS"
        + struct.pack("<HBB", 1, 2, 2)
        + struct.pack("<2Q", 2, 2)
        + np.arange(4.0).tobytes()
    )
    nan_payload = (
        b"PTNS"
        + struct.pack("<HBB", 1, 2, 1)
        + struct.pack("<Q", 2)
        + np.array([np.nan, 1.0]).tobytes()
    )
    inf_payload = nan_payload.replace(np.array([np.nan]).tobytes(), np.array([np.inf]).tobytes())
    corpus = [
        (b"JUNK" + good[4:], BadMagic),
        (good[:3], (TruncatedPayload, BadMagic)),
        (good[:7], TruncatedPayload),
        (good[:15], TruncatedPayload),
        (good[:30], TruncatedPayload),
        (good[:-1], TruncatedPayload),
        (good + b"\x01", TensorFormatError),
        (good[:4] + struct.pack("<HBB", 3, 2, 2) + good[8:], UnsupportedVersion),
        (good[:6] + b"\x09" + good[7:], UnsupportedDtype),
        (good[:7] + b"\x00" + good[8:], InvalidShape),
        (good[:8] + struct.pack("<2Q", 0, 2) + good[24:], InvalidShape),
        (nan_payload, NonFiniteValue),
        (inf_payload, NonFiniteValue),
        (b"", (TruncatedPayload, BadMagic)),
    ]
    for i, (blob, expected) in enumerate(corpus):
        bad = tmp_path / f"bad_{i}.ptns"
        bad.write_bytes(blob)
        with pytest.raises(expected):
            read_tensor(bad)
        # and every failure is a TensorFormatError, i.e. never a crash
        try:
            read_tensor(bad)
        except TensorFormatError:
            pass

    # truncate a valid file at every byte boundary: no crash at any length
    for cut in range(len(good)):
        bad = tmp_path / "cut.ptns"
        bad.write_bytes(good[:cut])
        with pytest.raises(TensorFormatError):
            read_tensor(bad)

    _announce("format conformance (1000 round-trips + corrupted corpus)")
