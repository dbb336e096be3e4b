"""Command-line front door: validate banks, sample probes, score single
transfers, and run full benchmark evaluations.

Machine-readable output (score records, evaluation reports) goes to stdout
or the --out file; human-readable text goes to stderr. Exit codes: 0
success, 1 usage error, 2 data or validation error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback

import numpy as np

from . import bench
from . import methods as M
from .calibrate import normalize_features, reduce_features
from .embed import embed_labels
from .errors import (
    MissingArtifact,
    ParseError,
    TensorFormatError,
    UnsupportedTask,
    ValidationError,
)
from .tensorio import load_labels, load_manifest, read_tensor

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _env_seed() -> int:
    raw = os.environ.get("MODELPICK_SEED", "")
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError:
        print(f"error: MODELPICK_SEED is not an integer: {raw!r}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modelpick", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a bank manifest and its files")
    p_val.add_argument("--manifest", required=True)

    p_sam = sub.add_parser("sample", help="sample a probe set for one target")
    p_sam.add_argument("--manifest", required=True)
    p_sam.add_argument("--target", required=True)
    p_sam.add_argument("--n", type=int, default=500)
    p_sam.add_argument("--seed", type=int, default=None)

    p_sco = sub.add_parser("score", help="score one transfer with one method")
    p_sco.add_argument("--method", required=True, choices=M.METHOD_NAMES)
    p_sco.add_argument("--features")
    p_sco.add_argument("--labels")
    p_sco.add_argument("--probs")
    p_sco.add_argument("--probe-features", dest="probe_features")
    p_sco.add_argument("--pca", type=int, default=None)
    p_sco.add_argument("--normalize", action="store_true")
    p_sco.add_argument("--k", type=int, default=1)
    p_sco.add_argument("--seed", type=int, default=None)
    p_sco.add_argument("--num-classes", dest="num_classes", type=int, default=None)
    p_sco.add_argument("--depth", type=int, default=None)
    p_sco.add_argument("--source-size", dest="source_size", type=int, default=None)
    p_sco.add_argument("--target-size", dest="target_size", type=int, default=None)

    p_eva = sub.add_parser("evaluate", help="run the full benchmark on a bank")
    p_eva.add_argument("--manifest", required=True)
    p_eva.add_argument("--methods", required=True, help="comma-separated method names")
    p_eva.add_argument("--mode", choices=bench.EVAL_MODES, default="varying_source")
    p_eva.add_argument("--n", type=int, default=500)
    p_eva.add_argument("--probes", type=int, default=5)
    p_eva.add_argument("--ensemble", choices=M.ENSEMBLE_NAMES, default="none")
    p_eva.add_argument("--pca", type=int, default=None)
    p_eva.add_argument("--k", type=int, default=1)
    p_eva.add_argument("--normalize", action="store_true")
    p_eva.add_argument("--probe-model", dest="probe_model", default=None)
    p_eva.add_argument("--lambda-ell", dest="lambda_ell", type=float, default=0.25)
    p_eva.add_argument("--ell-max", dest="ell_max", type=int, default=50)
    p_eva.add_argument("--seed", type=int, default=None)
    p_eva.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_eva.add_argument("--out", default=None)
    p_eva.add_argument("--csv", default=None)
    return parser


def _cmd_validate(args) -> int:
    try:
        load_manifest(args.manifest)
    except ValidationError as exc:
        for line in exc.violations:
            print(line, file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _cmd_sample(args) -> int:
    manifest = load_manifest(args.manifest)
    target = manifest.target(args.target)
    _, labels = load_labels(
        manifest.resolve(manifest.labels[target.target_id]),
        target.task_kind,
        target.num_classes,
    )
    seed = args.seed if args.seed is not None else _env_seed()
    probe = bench.sample_probe(labels, target.task_kind, args.n, seed, target.target_id)
    print(json.dumps(
        {"target_id": probe.target_id, "n": probe.n, "seed": probe.seed, "indices": probe.indices}
    ))
    return EXIT_OK


def _require(args, names) -> None:
    missing = [flag for flag, value in names if value is None]
    if missing:
        raise MissingArtifact(f"method '{args.method}' needs {', '.join(missing)}")


def _cmd_score(args) -> int:
    method = args.method
    seed = args.seed if args.seed is not None else _env_seed()

    if method == "heuristic":
        _require(args, [("--depth", args.depth), ("--source-size", args.source_size),
                        ("--target-size", args.target_size)])
        t0 = time.perf_counter()
        raw = M.heuristic_score(args.depth, args.source_size, args.target_size)
        ms = (time.perf_counter() - t0) * 1e3
        print(json.dumps({"method": method, "raw_score": raw, "wall_time_ms": ms}))
        return EXIT_OK

    if method in M.PROB_METHODS:
        _require(args, [("--probs", args.probs), ("--labels", args.labels)])
        P = read_tensor(args.probs).astype(np.float64)
        kind, labels = load_labels(args.labels, None, args.num_classes)
        if kind != "single_label":
            raise UnsupportedTask(f"{method} supports single-label targets only")
        if P.ndim != 2 or P.shape[0] != len(labels):
            raise ValueError(f"probability rows ({P.shape[0]}) do not match labels ({len(labels)})")
        classes = args.num_classes or int(np.max(labels)) + 1
        fn = M.leep_score if method == "leep" else M.nce_score
        t0 = time.perf_counter()
        raw = fn(P, labels, classes)
        ms = (time.perf_counter() - t0) * 1e3
        print(json.dumps({"method": method, "raw_score": raw, "wall_time_ms": ms}))
        return EXIT_OK

    _require(args, [("--features", args.features)])
    F = read_tensor(args.features).astype(np.float64)
    if F.ndim != 2:
        raise ValueError("features must be a rank-2 tensor")

    def calibrated(X):
        if args.normalize:
            X = normalize_features(X)
        if args.pca is not None:
            X = reduce_features(X, args.pca)
        return X

    if method in ("rsa", "dds"):
        _require(args, [("--probe-features", args.probe_features)])
        G = read_tensor(args.probe_features).astype(np.float64)
        fn = M.rsa_score if method == "rsa" else M.dds_score
        t0 = time.perf_counter()
        raw = fn(calibrated(F), calibrated(G))
        ms = (time.perf_counter() - t0) * 1e3
        print(json.dumps({"method": method, "raw_score": raw, "wall_time_ms": ms}))
        return EXIT_OK

    _require(args, [("--labels", args.labels)])
    kind, labels = load_labels(args.labels, None, args.num_classes)
    if len(labels) != F.shape[0]:
        raise ValueError(f"feature rows ({F.shape[0]}) do not match labels ({len(labels)})")
    if kind == "single_label":
        classes = args.num_classes or int(np.max(labels)) + 1
    else:
        if args.num_classes:
            classes = args.num_classes
        elif kind == "multi_label":
            classes = max(max(s) for s in labels) + 1
        else:
            boxed = [b[0] for img in labels for b in img]
            classes = (max(boxed) + 1) if boxed else 1

    t0 = time.perf_counter()
    if method == "parc":
        embedding = embed_labels(labels, kind, classes)
        raw = M.parc_score(calibrated(F), embedding)
    elif method == "knn_cv":
        arg = labels if kind == "single_label" else embed_labels(labels, kind, classes)
        raw = M.knn_cv_score(calibrated(F), arg, args.k)
    elif method == "hscore":
        if kind != "single_label":
            raise UnsupportedTask("hscore supports single-label targets only")
        raw = M.hscore(calibrated(F), labels, classes)
    elif method == "logistic":
        if kind != "single_label":
            raise UnsupportedTask("logistic supports single-label targets only")
        raw = M.logistic_score(calibrated(F), labels, classes, seed=seed)
    else:
        raise ValueError(f"unknown method '{method}'")
    ms = (time.perf_counter() - t0) * 1e3
    print(json.dumps({"method": method, "raw_score": raw, "wall_time_ms": ms}))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    names = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in names if m not in M.METHOD_NAMES]
    if not names or unknown:
        print(
            f"modelpick evaluate: error: unknown method(s): {', '.join(unknown) or '(none given)'};"
            f" choose from {', '.join(M.METHOD_NAMES)}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    manifest = load_manifest(args.manifest)
    seed = args.seed if args.seed is not None else _env_seed()
    configs = []
    for name in names:
        configs.append(
            M.MethodConfig(
                method=name,
                pca_dim=args.pca if name in M.FEATURE_METHODS else None,
                k=args.k,
                ensemble=args.ensemble,
                lambda_ell=args.lambda_ell,
                ell_max=args.ell_max,
                seed=seed,
                normalize=args.normalize if name in M.FEATURE_METHODS else False,
                probe_model_id=args.probe_model if name in ("rsa", "dds") else None,
            )
        )
    report = bench.run_benchmark(
        manifest,
        configs,
        n=args.n,
        num_probe_seeds=args.probes,
        mode=args.mode,
        master_seed=seed,
        jobs=max(1, args.jobs),
    )
    payload = json.dumps(report.to_json_dict(), indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(report.to_csv())
    print(report.summary_table(), file=sys.stderr)
    if any(entry["kind"] == "missing_artifact" for entry in report.skipped):
        for entry in report.skipped:
            print(
                f"skipped {entry['method']} ({entry['model_id']}, {entry['target_id']}): "
                f"{entry['reason']}",
                file=sys.stderr,
            )
        return EXIT_DATA
    return EXIT_OK


_HANDLERS = {
    "validate": _cmd_validate,
    "sample": _cmd_sample,
    "score": _cmd_score,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        for line in exc.violations:
            print(line, file=sys.stderr)
        return EXIT_DATA
    except (ParseError, TensorFormatError, MissingArtifact, UnsupportedTask) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, PermissionError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
