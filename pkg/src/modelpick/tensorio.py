"""PTNS v1 tensor container and bank-manifest I/O.

This is the only module that touches disk. A tensor file holds one f32 or
f64 array in a fixed little-endian layout:

    bytes 0-3   magic ``PTNS``
    bytes 4-5   version, u16 LE, currently 1
    byte  6     dtype code, u8: 1 = f32 LE, 2 = f64 LE
    byte  7     rank, u8, at least 1
    then        rank x u64 LE dimension sizes
    then        row-major scalar payload

The manifest is a JSON registry of models, targets, per-transfer artifact
files, ground-truth transfer outcomes, and label files.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    InvalidShape,
    NonFiniteValue,
    ParseError,
    TensorFormatError,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedVersion,
    ValidationError,
)

MAGIC = b"PTNS"
VERSION = 1
HEADER_BASE = 8  # magic + version + dtype code + rank

_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}

TASK_KINDS = ("single_label", "multi_label", "detection")


def _dtype_code(dtype) -> int | None:
    if dtype == np.dtype(np.float32):
        return 1
    if dtype == np.dtype(np.float64):
        return 2
    return None


def read_tensor(path) -> np.ndarray:
    """Read one PTNS v1 file into an ndarray, preserving the stored dtype.

    Raises :class:`BadMagic`, :class:`UnsupportedVersion`,
    :class:`UnsupportedDtype`, :class:`InvalidShape`,
    :class:`TruncatedPayload` or :class:`NonFiniteValue`; every error names
    the byte offset at which it was detected.
    """
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC):
        raise TruncatedPayload("file ends inside the magic bytes", len(data))
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagic("expected magic bytes 'PTNS'", 0)
    if len(data) < HEADER_BASE:
        raise TruncatedPayload("file ends inside the fixed header", len(data))
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported container version {version}", 4)
    code = data[6]
    if code not in _DTYPES:
        raise UnsupportedDtype(f"unknown dtype code {code}", 6)
    rank = data[7]
    if rank == 0:
        raise InvalidShape("rank must be at least 1", 7)
    dims_end = HEADER_BASE + 8 * rank
    if len(data) < dims_end:
        raise TruncatedPayload("file ends inside the dimension list", len(data))
    shape = struct.unpack_from(f"<{rank}Q", data, HEADER_BASE)
    for axis, dim in enumerate(shape):
        if dim == 0:
            raise InvalidShape(f"dimension {axis} is zero", HEADER_BASE + 8 * axis)
    dtype = _DTYPES[code]
    count = math.prod(shape)
    expected_end = dims_end + count * dtype.itemsize
    if len(data) < expected_end:
        have = (len(data) - dims_end) // dtype.itemsize
        raise TruncatedPayload(f"payload holds {have} of {count} scalars", len(data))
    if len(data) > expected_end:
        raise TensorFormatError(f"{len(data) - expected_end} trailing bytes", expected_end)
    flat = np.frombuffer(data, dtype=dtype, count=count, offset=dims_end)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        offset = dims_end + int(bad[0]) * dtype.itemsize
        raise NonFiniteValue("payload scalar is not finite", offset)
    return flat.reshape(shape).copy()


def write_tensor(tensor, path) -> None:
    """Write an array as a PTNS v1 file (atomic rename, byte-deterministic).

    float32 input is stored as f32, everything else as f64. The payload
    must be finite and the shape non-empty with no zero-sized dimension.
    """
    arr = np.asarray(tensor)
    if _dtype_code(arr.dtype) is None:
        arr = arr.astype(np.float64)
    if arr.ndim == 0:
        raise InvalidShape("rank must be at least 1", 7)
    for axis, dim in enumerate(arr.shape):
        if dim == 0:
            raise InvalidShape(f"dimension {axis} is zero", HEADER_BASE + 8 * axis)
    code = _dtype_code(arr.dtype)
    dtype = _DTYPES[code]
    flat = np.ascontiguousarray(arr, dtype=dtype).reshape(-1)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        offset = HEADER_BASE + 8 * arr.ndim + int(bad[0]) * dtype.itemsize
        raise NonFiniteValue("payload scalar is not finite", offset)
    header = MAGIC + struct.pack("<HBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    target = Path(path)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(header + flat.tobytes())
    os.replace(tmp, target)


def peek_tensor_shape(path) -> tuple[str, tuple[int, ...]]:
    """Read only the header; returns (dtype name, shape). Same errors as read."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER_BASE)
        if len(head) < len(MAGIC):
            raise TruncatedPayload("file ends inside the magic bytes", len(head))
        if head[: len(MAGIC)] != MAGIC:
            raise BadMagic("expected magic bytes 'PTNS'", 0)
        if len(head) < HEADER_BASE:
            raise TruncatedPayload("file ends inside the fixed header", len(head))
        (version,) = struct.unpack_from("<H", head, 4)
        if version != VERSION:
            raise UnsupportedVersion(f"unsupported container version {version}", 4)
        code = head[6]
        if code not in _DTYPES:
            raise UnsupportedDtype(f"unknown dtype code {code}", 6)
        rank = head[7]
        if rank == 0:
            raise InvalidShape("rank must be at least 1", 7)
        dims = fh.read(8 * rank)
        if len(dims) < 8 * rank:
            raise TruncatedPayload("file ends inside the dimension list", HEADER_BASE + len(dims))
        shape = struct.unpack(f"<{rank}Q", dims)
    name = "f32" if code == 1 else "f64"
    return name, tuple(int(d) for d in shape)


# --------------------------------------------------------------------------
# Bank manifest


@dataclass
class ModelMeta:
    model_id: str
    depth_layers: int
    source_dataset_size: int
    architecture: str = ""
    source_dataset: str = ""
    pretext_task: str = ""


@dataclass
class TargetMeta:
    target_id: str
    target_dataset_size: int
    task_kind: str
    num_classes: int


@dataclass
class TransferOutcome:
    model_id: str
    target_id: str
    accuracy: float


@dataclass
class ArtifactPaths:
    feature_path: str
    prob_path: str | None = None


@dataclass
class BankManifest:
    """Typed view of a validated manifest. Paths stay relative to base_dir."""

    models: list[ModelMeta]
    targets: list[TargetMeta]
    artifacts: dict[tuple[str, str], ArtifactPaths]
    outcomes: list[TransferOutcome]
    labels: dict[str, str]
    base_dir: Path = field(default_factory=Path.cwd)

    def model(self, model_id: str) -> ModelMeta:
        for m in self.models:
            if m.model_id == model_id:
                return m
        raise KeyError(model_id)

    def target(self, target_id: str) -> TargetMeta:
        for t in self.targets:
            if t.target_id == target_id:
                return t
        raise KeyError(target_id)

    def resolve(self, relpath: str) -> Path:
        p = Path(relpath)
        return p if p.is_absolute() else self.base_dir / p


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _check_model(entry, i, seen, out):
    loc = f"$.models[{i}]"
    if not isinstance(entry, dict):
        out.append(f"{loc}: expected an object")
        return
    mid = entry.get("model_id")
    if not isinstance(mid, str) or not mid:
        out.append(f"{loc}.model_id: missing or not a string")
    elif mid in seen:
        out.append(f"{loc}.model_id: duplicate model_id '{mid}'")
    else:
        seen.add(mid)
    depth = entry.get("depth_layers")
    if not _is_int(depth) or depth < 1:
        out.append(f"{loc}.depth_layers: must be an integer >= 1")
    size = entry.get("source_dataset_size")
    if not _is_int(size) or size < 1:
        out.append(f"{loc}.source_dataset_size: must be an integer >= 1")


def _check_target(entry, i, seen, out):
    loc = f"$.targets[{i}]"
    if not isinstance(entry, dict):
        out.append(f"{loc}: expected an object")
        return
    tid = entry.get("target_id")
    if not isinstance(tid, str) or not tid:
        out.append(f"{loc}.target_id: missing or not a string")
    elif tid in seen:
        out.append(f"{loc}.target_id: duplicate target_id '{tid}'")
    else:
        seen.add(tid)
    size = entry.get("target_dataset_size")
    if not _is_int(size) or size < 1:
        out.append(f"{loc}.target_dataset_size: must be an integer >= 1")
    kind = entry.get("task_kind")
    if kind not in TASK_KINDS:
        out.append(f"{loc}.task_kind: must be one of {', '.join(TASK_KINDS)}")
    classes = entry.get("num_classes")
    floor = 2 if kind == "single_label" else 1
    if not _is_int(classes) or classes < floor:
        out.append(f"{loc}.num_classes: must be an integer >= {floor}")


def _check_label_content(loc, labels, meta, out):
    kind = meta.get("task_kind")
    size = meta.get("target_dataset_size")
    classes = meta.get("num_classes")
    if not isinstance(labels, list):
        out.append(f"{loc}: label file must hold a JSON array")
        return
    if _is_int(size) and len(labels) != size:
        out.append(f"{loc}: {len(labels)} entries but target_dataset_size is {size}")
    for i, item in enumerate(labels):
        if kind == "single_label":
            if not _is_int(item) or item < 0 or (_is_int(classes) and item >= classes):
                out.append(f"{loc}[{i}]: class index out of range")
                return
        elif kind == "multi_label":
            ok = isinstance(item, list) and item and all(
                _is_int(c) and 0 <= c and (not _is_int(classes) or c < classes) for c in item
            )
            if not ok:
                out.append(f"{loc}[{i}]: expected a non-empty array of in-range class indices")
                return
        elif kind == "detection":
            if not isinstance(item, dict) or not isinstance(item.get("boxes"), list):
                out.append(f"{loc}[{i}]: expected an object with a 'boxes' array")
                return
            for b, box in enumerate(item["boxes"]):
                ok = (
                    isinstance(box, dict)
                    and _is_int(box.get("class"))
                    and 0 <= box["class"]
                    and (not _is_int(classes) or box["class"] < classes)
                    and all(isinstance(box.get(kf), (int, float)) for kf in ("x1", "y1", "x2", "y2"))
                    and box["x2"] > box["x1"]
                    and box["y2"] > box["y1"]
                )
                if not ok:
                    out.append(f"{loc}[{i}].boxes[{b}]: malformed or degenerate box")
                    return


def validate_manifest(doc, base_dir=".") -> list[str]:
    """Check every manifest invariant; returns all violations found.

    Never raises on bad content. Each violation carries a JSON-path-style
    location. File paths are resolved relative to ``base_dir``.
    """
    base = Path(base_dir)
    out: list[str] = []
    if not isinstance(doc, dict):
        return ["$: manifest must be a JSON object"]
    for key in ("models", "targets", "artifacts", "outcomes", "labels"):
        if key not in doc:
            out.append(f"$.{key}: missing")

    model_ids: set[str] = set()
    models = doc.get("models", [])
    if isinstance(models, list):
        for i, entry in enumerate(models):
            _check_model(entry, i, model_ids, out)
    elif "models" in doc:
        out.append("$.models: expected an array")

    target_ids: set[str] = set()
    target_meta: dict[str, dict] = {}
    targets = doc.get("targets", [])
    if isinstance(targets, list):
        for i, entry in enumerate(targets):
            _check_target(entry, i, target_ids, out)
            if isinstance(entry, dict) and isinstance(entry.get("target_id"), str):
                target_meta[entry["target_id"]] = entry
    elif "targets" in doc:
        out.append("$.targets: expected an array")

    artifacts = doc.get("artifacts", {})
    if isinstance(artifacts, dict):
        for mid, per_target in artifacts.items():
            if mid not in model_ids:
                out.append(f"$.artifacts.{mid}: unknown model '{mid}'")
            if not isinstance(per_target, dict):
                out.append(f"$.artifacts.{mid}: expected an object keyed by target_id")
                continue
            for tid, entry in per_target.items():
                loc = f"$.artifacts.{mid}.{tid}"
                if tid not in target_ids:
                    out.append(f"{loc}: unknown target '{tid}'")
                if not isinstance(entry, dict) or not isinstance(entry.get("feature_path"), str):
                    out.append(f"{loc}: expected an object with a feature_path string")
                    continue
                expected_rows = None
                meta = target_meta.get(tid)
                if meta is not None and _is_int(meta.get("target_dataset_size")):
                    expected_rows = meta["target_dataset_size"]
                for key in ("feature_path", "prob_path"):
                    rel = entry.get(key)
                    if rel is None and key == "prob_path":
                        continue
                    if not isinstance(rel, str):
                        out.append(f"{loc}.{key}: expected a string path")
                        continue
                    fp = base / rel
                    if not fp.is_file():
                        out.append(f"{loc}.{key}: file not found: {rel}")
                        continue
                    try:
                        _, shape = peek_tensor_shape(fp)
                    except TensorFormatError as exc:
                        out.append(f"{loc}.{key}: not a readable tensor file: {exc}")
                        continue
                    if len(shape) != 2:
                        out.append(f"{loc}.{key}: expected a rank-2 tensor, got rank {len(shape)}")
                    elif expected_rows is not None and shape[0] != expected_rows:
                        out.append(
                            f"{loc}.{key}: {shape[0]} rows but target_dataset_size is {expected_rows}"
                        )
    elif "artifacts" in doc:
        out.append("$.artifacts: expected an object")

    outcomes = doc.get("outcomes", [])
    if isinstance(outcomes, list):
        for i, entry in enumerate(outcomes):
            loc = f"$.outcomes[{i}]"
            if not isinstance(entry, dict):
                out.append(f"{loc}: expected an object")
                continue
            mid, tid = entry.get("model_id"), entry.get("target_id")
            if mid not in model_ids:
                out.append(f"{loc}.model_id: unknown model '{mid}'")
            if tid not in target_ids:
                out.append(f"{loc}.target_id: unknown target '{tid}'")
            acc = entry.get("accuracy")
            if not isinstance(acc, (int, float)) or isinstance(acc, bool) or not 0.0 <= acc <= 1.0:
                out.append(f"{loc}.accuracy: must be a number in [0, 1]")
    elif "outcomes" in doc:
        out.append("$.outcomes: expected an array")

    labels = doc.get("labels", {})
    if isinstance(labels, dict):
        for tid in sorted(target_ids - set(labels)):
            out.append(f"$.labels: no label file for target '{tid}'")
        for tid, rel in labels.items():
            loc = f"$.labels.{tid}"
            if tid not in target_ids:
                out.append(f"{loc}: unknown target '{tid}'")
                continue
            if not isinstance(rel, str):
                out.append(f"{loc}: expected a string path")
                continue
            fp = base / rel
            if not fp.is_file():
                out.append(f"{loc}: file not found: {rel}")
                continue
            try:
                content = json.loads(fp.read_text())
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                out.append(f"{loc}: label file is not valid JSON: {exc}")
                continue
            _check_label_content(loc, content, target_meta.get(tid, {}), out)
    elif "labels" in doc:
        out.append("$.labels: expected an object")

    return out


def load_manifest(path) -> BankManifest:
    """Parse and fully validate a manifest file.

    Raises :class:`ParseError` on malformed JSON and
    :class:`ValidationError` (carrying every violation) on invalid content.
    """
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: {exc}") from exc
    base = p.parent
    violations = validate_manifest(doc, base)
    if violations:
        raise ValidationError(violations)
    models = [
        ModelMeta(
            model_id=e["model_id"],
            depth_layers=e["depth_layers"],
            source_dataset_size=e["source_dataset_size"],
            architecture=e.get("architecture", ""),
            source_dataset=e.get("source_dataset", ""),
            pretext_task=e.get("pretext_task", ""),
        )
        for e in doc["models"]
    ]
    targets = [
        TargetMeta(
            target_id=e["target_id"],
            target_dataset_size=e["target_dataset_size"],
            task_kind=e["task_kind"],
            num_classes=e["num_classes"],
        )
        for e in doc["targets"]
    ]
    artifacts = {
        (mid, tid): ArtifactPaths(entry["feature_path"], entry.get("prob_path"))
        for mid, per_target in doc["artifacts"].items()
        for tid, entry in per_target.items()
    }
    outcomes = [
        TransferOutcome(e["model_id"], e["target_id"], float(e["accuracy"]))
        for e in doc["outcomes"]
    ]
    return BankManifest(models, targets, artifacts, outcomes, dict(doc["labels"]), base)


def load_labels(path, task_kind: str | None = None, num_classes: int | None = None):
    """Load a label file; returns ``(task_kind, labels)``.

    ``labels`` is an int array for single_label, a list of index lists for
    multi_label, or a list of per-image ``(class, x1, y1, x2, y2)`` box
    tuples for detection. With ``task_kind=None`` the kind is inferred from
    the first entry.
    """
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: {exc}") from exc
    if not isinstance(doc, list) or not doc:
        raise ParseError(f"{p}: label file must hold a non-empty JSON array")
    if task_kind is None:
        first = doc[0]
        if _is_int(first):
            task_kind = "single_label"
        elif isinstance(first, list):
            task_kind = "multi_label"
        elif isinstance(first, dict):
            task_kind = "detection"
        else:
            raise ParseError(f"{p}: cannot infer task kind from first entry")
    if task_kind == "single_label":
        if not all(_is_int(x) and x >= 0 for x in doc):
            raise ParseError(f"{p}: expected an array of class indices")
        y = np.asarray(doc, dtype=np.int64)
        if num_classes is not None and y.max() >= num_classes:
            raise ValueError(f"{p}: class index {int(y.max())} out of range [0, {num_classes})")
        return task_kind, y
    if task_kind == "multi_label":
        sets = []
        for i, item in enumerate(doc):
            if not isinstance(item, list) or not item or not all(_is_int(c) and c >= 0 for c in item):
                raise ParseError(f"{p}[{i}]: expected a non-empty array of class indices")
            if num_classes is not None and max(item) >= num_classes:
                raise ValueError(f"{p}[{i}]: class index {max(item)} out of range [0, {num_classes})")
            sets.append(sorted(set(item)))
        return task_kind, sets
    if task_kind == "detection":
        images = []
        for i, item in enumerate(doc):
            if not isinstance(item, dict) or not isinstance(item.get("boxes"), list):
                raise ParseError(f"{p}[{i}]: expected an object with a 'boxes' array")
            boxes = []
            for b, box in enumerate(item["boxes"]):
                try:
                    cls = box["class"]
                    coords = (float(box["x1"]), float(box["y1"]), float(box["x2"]), float(box["y2"]))
                except (TypeError, KeyError) as exc:
                    raise ParseError(f"{p}[{i}].boxes[{b}]: malformed box") from exc
                if not _is_int(cls) or cls < 0 or (num_classes is not None and cls >= num_classes):
                    raise ValueError(f"{p}[{i}].boxes[{b}]: class index out of range")
                boxes.append((cls, *coords))
            images.append(boxes)
        return task_kind, images
    raise ValueError(f"unknown task kind '{task_kind}'")
