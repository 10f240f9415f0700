"""Action-loss ablation: train with and without the direct action term, compare argmax edit distances."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

from ..dataio.clips import Example
from ..interaction import ActionTaxonomy
from ..metrics import evaluate_dataset
from .config import TrainConfig
from .inference import decode, decode_actions, predict_distributions, truths_of
from .train import train


@dataclass
class AblationRow:
    loss_verb: bool
    loss_noun: bool
    loss_action: bool
    verb_ed: float
    noun_ed: float
    action_ed: float


def run_ablation_table1(
    config: TrainConfig,
    train_examples: Sequence[Example],
    val_examples: Sequence[Example],
    taxonomy: ActionTaxonomy,
    callback: Callable[[dict], None] | None = None,
) -> list[AblationRow]:
    """Two rows: verb+noun+action loss, then verb+noun loss.

    The action-loss model is decoded from its action head (verbs and nouns read
    off the predicted pair); the other from per-slot verb and noun argmax.
    Interaction is not applied.
    """
    truths = truths_of(val_examples)
    rows = []
    for with_action in (True, False):
        cfg = config.replace(loss_verb=True, loss_noun=True, loss_action=with_action, decode_mode="argmax")
        result = train(cfg, train_examples, taxonomy if with_action else None, callback)
        dists = predict_distributions(result.model, val_examples)
        preds = decode_actions(dists, taxonomy.pairs) if with_action else decode(dists, mode="argmax")
        report = evaluate_dataset(preds, truths)
        rows.append(AblationRow(True, True, with_action, report.verb_ed, report.noun_ed, report.action_ed))
    return rows


def write_ablation(out_dir: str | Path, rows: Sequence[AblationRow]) -> None:
    out_dir = Path(out_dir)
    (out_dir / "ablation.json").write_text(json.dumps([asdict(r) for r in rows], indent=2) + "\n")
    with (out_dir / "ablation.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(asdict(rows[0])))
        writer.writeheader()
        for r in rows:
            writer.writerow(asdict(r))
