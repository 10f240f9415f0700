"""On-disk layout of a generated or ingested dataset split.

``<split>/annotations.jsonl``  one ClipAnnotation per line
``<split>/features/<clip_id>.bin``  little-endian float32, row-major (T, D')
``<split>/features/<clip_id>.json``  sidecar with clip_id, shape, dtype, window_seconds
``<split>/examples.jsonl``  example_id, clip_id, cut_time and the Z target pairs
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .clips import ClipAnnotation, Example, FeatureSequence, make_example

FEATURE_DTYPE = "<f4"


def write_annotations(path: str | Path, annotations: Iterable[ClipAnnotation]) -> None:
    with Path(path).open("w") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_json(), separators=(",", ":")) + "\n")


def read_annotations(path: str | Path) -> list[ClipAnnotation]:
    out = []
    with Path(path).open() as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(ClipAnnotation.from_json(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from exc
    return out


def write_features(directory: str | Path, features: FeatureSequence) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(features.embeddings, dtype=FEATURE_DTYPE)
    (directory / f"{features.clip_id}.bin").write_bytes(data.tobytes())
    sidecar = {
        "clip_id": features.clip_id,
        "shape": list(data.shape),
        "dtype": FEATURE_DTYPE,
        "window_seconds": features.window_seconds,
    }
    (directory / f"{features.clip_id}.json").write_text(json.dumps(sidecar) + "\n")


def read_features(directory: str | Path, clip_id: str) -> FeatureSequence:
    directory = Path(directory)
    meta = json.loads((directory / f"{clip_id}.json").read_text())
    raw = np.frombuffer((directory / f"{clip_id}.bin").read_bytes(), dtype=meta.get("dtype", FEATURE_DTYPE))
    shape = tuple(meta["shape"])
    if raw.size != int(np.prod(shape)):
        raise ValueError(f"{clip_id}: {raw.size} values on disk, sidecar says {shape}")
    return FeatureSequence(meta["clip_id"], raw.reshape(shape).astype(np.float32), float(meta["window_seconds"]))


def write_examples(path: str | Path, examples: Iterable[Example]) -> None:
    with Path(path).open("w") as fh:
        for ex in examples:
            rec = {
                "example_id": ex.example_id,
                "clip_id": ex.clip_id,
                "cut_time": ex.cut_time,
                "targets": ex.targets.tolist(),
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_example_index(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_split(directory: str | Path, annotations, features, examples) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_annotations(directory / "annotations.jsonl", annotations)
    for feats in features:
        write_features(directory / "features", feats)
    write_examples(directory / "examples.jsonl", examples)


def load_split(directory: str | Path, long_len: int, short_len: int, num_future: int) -> list[Example]:
    """Rebuild examples from annotations, features and the recorded cut times."""
    directory = Path(directory)
    annotations = {a.clip_id: a for a in read_annotations(directory / "annotations.jsonl")}
    cache: dict[str, FeatureSequence] = {}
    examples = []
    for rec in read_example_index(directory / "examples.jsonl"):
        clip_id = rec["clip_id"]
        if clip_id not in cache:
            cache[clip_id] = read_features(directory / "features", clip_id)
        ex = make_example(annotations[clip_id], cache[clip_id], rec["cut_time"], long_len, short_len, num_future, rec["example_id"])
        examples.append(ex)
    return examples


def read_truths(directory: str | Path) -> dict[str, list[tuple[int, int]]]:
    return {rec["example_id"]: [tuple(p) for p in rec["targets"]] for rec in read_example_index(Path(directory) / "examples.jsonl")}
