"""Versioned binary checkpoints plus a human-readable manifest.

Layout: an 8-byte magic, a little-endian u64 header length, a JSON header
(schema id, variant, model dims, resolved run config, class split, word
vocabulary, array names/shapes), then the raw float64 little-endian array
payloads in header order. Fully deterministic bytes for identical inputs;
no timestamps anywhere.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .model import ModelConfig, ModelParams, ModelVariant, TrainedModel
from .wordvec import WordTable

MAGIC = b"CTXPROT1"
SCHEMA = "contextproto/checkpoint-v1"


def save_checkpoint(path, model: TrainedModel, run_config: dict | None = None) -> None:
    path = Path(path)
    entries = [(name, t.data) for name, t in sorted(model.params.named().items())]
    entries.append(("word_table.vectors", model.word_table.vectors))
    header = {
        "schema": SCHEMA,
        "variant": model.variant.value,
        "model_config": dataclasses.asdict(model.params.config),
        "run_config": run_config,
        "train_classes": list(model.train_classes),
        "test_classes": list(model.test_classes),
        "word_names": list(model.word_table.names),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in entries],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in entries:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    _write_manifest(path, header, entries)


def _write_manifest(path: Path, header: dict, entries) -> None:
    lines = [
        f"schema: {header['schema']}",
        f"variant: {header['variant']}",
        f"train classes: {len(header['train_classes'])}",
        f"test classes: {len(header['test_classes'])}",
        f"vocabulary: {len(header['word_names'])}",
        "arrays:",
    ]
    for name, arr in entries:
        shape = "x".join(str(s) for s in arr.shape)
        lines.append(f"  {name}  {shape}  l2={np.linalg.norm(arr):.6e}")
    lines.append("model_config: " + json.dumps(header["model_config"], sort_keys=True))
    Path(str(path) + ".manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[TrainedModel, dict | None]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<Q", raw[len(MAGIC): len(MAGIC) + 8])
    start = len(MAGIC) + 8
    try:
        header = json.loads(raw[start: start + hlen].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    if header.get("schema") != SCHEMA:
        raise CheckpointError(f"{path}: unsupported checkpoint schema {header.get('schema')!r}")

    offset = start + hlen
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        chunk = raw[offset: offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated array payload for {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64)
        offset += nbytes

    config = ModelConfig(**header["model_config"])
    word_vectors = arrays.pop("word_table.vectors")
    table = WordTable(header["word_names"], word_vectors)
    params = ModelParams.from_arrays(config, arrays)
    model = TrainedModel(
        variant=ModelVariant.parse(header["variant"]),
        params=params,
        word_table=table,
        train_classes=list(header["train_classes"]),
        test_classes=list(header["test_classes"]),
    )
    return model, header.get("run_config")
