"""Reader for Ego4D long-term anticipation annotation files.

The official ``fho_lta_{train,val}.json`` files hold a ``clips`` list with one
record per action segment (``clip_uid``, ``action_idx``,
``action_clip_start_sec``, ``action_clip_end_sec``, ``verb_label``,
``noun_label``). Segments are grouped by clip and ordered by ``action_idx``.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

from .clips import ClipAnnotation


def read_ego4d_lta(path: str | Path, num_verbs: int, num_nouns: int) -> list[ClipAnnotation]:
    data = json.loads(Path(path).read_text())
    records = data["clips"] if isinstance(data, dict) else data
    grouped: dict[str, list[dict]] = defaultdict(list)
    for i, rec in enumerate(records):
        try:
            grouped[rec["clip_uid"]].append(rec)
        except KeyError as exc:
            raise ValueError(f"{path}: record {i} lacks clip_uid") from exc
    out = []
    for clip_uid in sorted(grouped):
        segs = sorted(grouped[clip_uid], key=lambda r: r["action_idx"])
        events = [
            (r["action_clip_start_sec"], r["action_clip_end_sec"], r["verb_label"], r["noun_label"]) for r in segs
        ]
        out.append(ClipAnnotation(clip_uid, events, num_verbs, num_nouns))
    return out
