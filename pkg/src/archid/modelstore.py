"""Portable, versioned on-disk model container.

Byte layout (all integers little-endian, see docs/model_format.md):

    offset 0   magic, 8 bytes: b"ARCHIDML"
    offset 8   u32 format version (currently 1)
    offset 12  u32 header length H
    offset 16  header, H bytes of UTF-8 JSON
    16 + H     array payload: the manifest's arrays back to back,
               each encoded with its little-endian dtype
    end - 4    u32 CRC32 of the payload

The header carries family, hyperparameters, class names, feature schema
version, optional feature-index mask, creation time, an optional digest
of the training CSV, and the array manifest (name, dtype, shape).
Numeric parameters are stored as raw 64-bit values, so loading
reproduces predictions bit-for-bit on any platform.
"""

from __future__ import annotations

import json
import os
import tempfile
import zlib
from datetime import datetime, timezone

import numpy as np

from . import features
from .classifiers import FAMILIES, TrainedModel
from .errors import BadMagic, CorruptPayload, InvalidModel, IoFailure, UnsupportedVersion

MAGIC = b"ARCHIDML"
FORMAT_VERSION = 1

_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8"), "<u8": np.dtype("<u8")}

_TREE_ARRAYS = ("feature", "threshold", "left", "right", "counts")


def _array_dtype_tag(arr: np.ndarray) -> str:
    if arr.dtype.kind == "f":
        return "<f8"
    if arr.dtype.kind == "u":
        return "<u8"
    return "<i8"


def _collect_arrays(model: TrainedModel):
    """Flatten family parameters into an ordered (name, array) list."""
    out = []
    if model.family == "knn":
        out = [("train_x", model.parameters["train_x"]), ("train_y", model.parameters["train_y"])]
    elif model.family == "logistic_regression":
        out = [("weights", model.parameters["weights"])]
    elif model.family == "naive_bayes":
        out = [(k, model.parameters[k]) for k in ("means", "variances", "priors")]
    elif model.family == "decision_tree":
        out = [(f"tree_{k}", model.parameters["tree"][k]) for k in _TREE_ARRAYS]
    elif model.family == "random_forest":
        out = [("tree_seeds", model.parameters["tree_seeds"])]
        for i, tree in enumerate(model.parameters["trees"]):
            out.extend((f"t{i}_{k}", tree[k]) for k in _TREE_ARRAYS)
    if model.feature_indices is not None:
        out.append(("feature_indices", model.feature_indices))
    return out


def _restore_parameters(model_dict, arrays):
    family = model_dict["family"]
    if family == "knn":
        return {"train_x": arrays["train_x"], "train_y": arrays["train_y"]}
    if family == "logistic_regression":
        return {"weights": arrays["weights"]}
    if family == "naive_bayes":
        return {k: arrays[k] for k in ("means", "variances", "priors")}
    if family == "decision_tree":
        return {"tree": {k: arrays[f"tree_{k}"] for k in _TREE_ARRAYS}}
    if family == "random_forest":
        n_trees = model_dict["hyperparameters"]["n_trees"]
        trees = [{k: arrays[f"t{i}_{k}"] for k in _TREE_ARRAYS} for i in range(n_trees)]
        return {"trees": trees, "tree_seeds": arrays["tree_seeds"]}
    raise InvalidModel(f"unknown family {family!r}")


def validate_model(model: TrainedModel) -> None:
    if model.family not in FAMILIES:
        raise InvalidModel(f"unknown family {model.family!r}")
    if len(set(model.class_names)) < 2:
        raise InvalidModel("a model needs at least 2 distinct classes")
    schema = features.get_schema()
    width = schema.size if model.schema_version == schema.version else None
    if model.feature_indices is not None:
        idx = np.asarray(model.feature_indices)
        if idx.size == 0 or idx.min() < 0 or (width is not None and idx.max() >= width):
            raise InvalidModel("feature indices out of range for the feature schema")
        eff = idx.size
    else:
        eff = width
    k = len(model.class_names)
    p = model.parameters
    if model.family == "knn":
        if model.hyperparameters.get("k", 0) < 1:
            raise InvalidModel("knn requires k >= 1")
        if len(p["train_x"]) < model.hyperparameters["k"]:
            raise InvalidModel("knn has fewer stored samples than k")
        if len(p["train_x"]) != len(p["train_y"]):
            raise InvalidModel("knn sample/label count mismatch")
    elif model.family == "logistic_regression":
        if p["weights"].shape[0] != k:
            raise InvalidModel("weight matrix rows != class count")
        if eff is not None and p["weights"].shape[1] != eff + 1:
            raise InvalidModel("weight matrix columns != features + bias")
    elif model.family == "naive_bayes":
        if p["means"].shape != p["variances"].shape or p["means"].shape[0] != k:
            raise InvalidModel("naive Bayes parameter shapes inconsistent")
        if np.any(p["variances"] <= 0):
            raise InvalidModel("naive Bayes has non-positive variances")
    elif model.family == "decision_tree":
        _validate_tree(p["tree"], k, eff)
    elif model.family == "random_forest":
        if len(p["trees"]) < 1:
            raise InvalidModel("a forest needs at least one tree")
        for tree in p["trees"]:
            _validate_tree(tree, k, eff)


def _validate_tree(tree, n_classes, eff_features):
    n = len(tree["feature"])
    if n == 0:
        raise InvalidModel("empty tree")
    for key in _TREE_ARRAYS:
        if len(tree[key]) != n:
            raise InvalidModel("tree arrays have inconsistent lengths")
    if tree["counts"].shape != (n, n_classes):
        raise InvalidModel("tree class-count matrix shape mismatch")
    internal = tree["feature"] >= 0
    if eff_features is not None and internal.any() and tree["feature"][internal].max() >= eff_features:
        raise InvalidModel("tree references a feature outside the schema")
    for child in (tree["left"], tree["right"]):
        if internal.any() and (child[internal].min() < 0 or child[internal].max() >= n):
            raise InvalidModel("tree child index out of range")


def save_model(model: TrainedModel, path, training_digest: str | None = None) -> int:
    """Validate and write the model; returns the byte count written."""
    validate_model(model)
    arrays = _collect_arrays(model)
    manifest = []
    chunks = []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr)
        tag = _array_dtype_tag(arr)
        chunks.append(arr.astype(_DTYPES[tag], copy=False).tobytes())
        manifest.append({"name": name, "dtype": tag, "shape": list(arr.shape)})

    header = {
        "format_version": FORMAT_VERSION,
        "schema_version": model.schema_version,
        "family": model.family,
        "hyperparameters": _plain(model.hyperparameters),
        "class_names": list(model.class_names),
        "has_feature_indices": model.feature_indices is not None,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "training_digest": training_digest,
        "arrays": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(chunks)
    blob = (
        MAGIC
        + FORMAT_VERSION.to_bytes(4, "little")
        + len(header_bytes).to_bytes(4, "little")
        + header_bytes
        + payload
        + (zlib.crc32(payload) & 0xFFFFFFFF).to_bytes(4, "little")
    )

    path = os.fspath(path)
    try:
        directory = os.path.dirname(path) or "."
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".model-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(blob)
            os.chmod(tmp, 0o644)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write model to {path}: {exc}") from exc
    return len(blob)


def load_model(path) -> TrainedModel:
    try:
        blob = open(path, "rb").read()
    except OSError as exc:
        raise IoFailure(f"cannot read model from {path}: {exc}") from exc

    if blob[:8] != MAGIC:
        raise BadMagic(f"{path}: not a model file (magic {blob[:8]!r})")
    if len(blob) < 16:
        raise CorruptPayload(f"{path}: truncated before header", offset=len(blob))
    version = int.from_bytes(blob[8:12], "little")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: format version {version} not supported")
    header_len = int.from_bytes(blob[12:16], "little")
    if 16 + header_len + 4 > len(blob):
        raise CorruptPayload(f"{path}: truncated header", offset=len(blob))
    try:
        header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptPayload(f"{path}: unreadable header ({exc})", offset=16) from exc

    payload_start = 16 + header_len
    expected = sum(
        int(np.prod(entry["shape"])) * 8 for entry in header["arrays"]
    )
    payload_end = payload_start + expected
    if payload_end + 4 > len(blob):
        raise CorruptPayload(f"{path}: truncated payload", offset=len(blob))
    payload = blob[payload_start:payload_end]
    crc_stored = int.from_bytes(blob[payload_end:payload_end + 4], "little")
    if (zlib.crc32(payload) & 0xFFFFFFFF) != crc_stored:
        raise CorruptPayload(f"{path}: payload checksum mismatch", offset=payload_start)

    arrays = {}
    cursor = 0
    for entry in header["arrays"]:
        if entry["dtype"] not in _DTYPES:
            raise CorruptPayload(
                f"{path}: unknown dtype {entry['dtype']!r}", offset=payload_start + cursor
            )
        count = int(np.prod(entry["shape"]))
        raw = payload[cursor:cursor + count * 8]
        arr = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"])
        # Convert to native byte order so downstream math is uniform.
        arrays[entry["name"]] = np.ascontiguousarray(arr.astype(arr.dtype.newbyteorder("=")))
        cursor += count * 8

    feature_indices = arrays.pop("feature_indices", None)
    model = TrainedModel(
        family=header["family"],
        hyperparameters=header["hyperparameters"],
        parameters=_restore_parameters(header, arrays),
        schema_version=header["schema_version"],
        class_names=list(header["class_names"]),
        feature_indices=feature_indices,
    )
    validate_model(model)
    return model


def _plain(d: dict) -> dict:
    out = {}
    for key, value in d.items():
        if isinstance(value, np.integer):
            value = int(value)
        elif isinstance(value, np.floating):
            value = float(value)
        elif isinstance(value, np.bool_):
            value = bool(value)
        out[key] = value
    return out
