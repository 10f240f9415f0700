"""Training objective: verb + noun cross-entropy with optional action and auxiliary terms."""

from __future__ import annotations

import numpy as np

from ..interaction import ActionTaxonomy
from ..numerics import functional as F
from ..numerics.tensor import Tensor
from .config import ConfigError, TrainConfig
from .model import ModelOutput


def action_targets(targets: np.ndarray, taxonomy: ActionTaxonomy) -> np.ndarray:
    """Map (..., 2) pair targets to taxonomy ids; pairs outside the taxonomy become -1."""
    flat = targets.reshape(-1, 2)
    ids = np.array([taxonomy.action_id(v, n, default=-1) for v, n in flat], dtype=np.int64)
    return ids.reshape(targets.shape[:-1])


def compute_loss(
    output: ModelOutput,
    targets: np.ndarray,
    config: TrainConfig,
    taxonomy: ActionTaxonomy | None = None,
    frame_labels: np.ndarray | None = None,
) -> tuple[Tensor, dict[str, float]]:
    """Sum of the enabled cross-entropy terms (unit weights) and each term's value.

    ``targets``: (batch, Z, 2) verb/noun ids. ``frame_labels``: (batch, L+S, 2)
    per-window labels with -1 on padding, needed for the auxiliary term.
    """
    preds = output.predictions
    targets = np.asarray(targets)
    if targets.shape[-2] != preds.verb_logits.shape[-2]:
        raise ValueError(f"targets cover {targets.shape[-2]} slots, model predicts {preds.verb_logits.shape[-2]}")
    terms: dict[str, Tensor] = {}
    if config.loss_verb:
        terms["verb"] = F.cross_entropy(preds.verb_logits, targets[..., 0])
    if config.loss_noun:
        terms["noun"] = F.cross_entropy(preds.noun_logits, targets[..., 1])
    if config.loss_action:
        if taxonomy is None or preds.action_logits is None:
            raise ConfigError("action loss requires a taxonomy and an action head")
        terms["action"] = F.cross_entropy(preds.action_logits, action_targets(targets, taxonomy))
    if config.loss_aux_short_term:
        if frame_labels is None or output.aux_verb_logits is None:
            raise ConfigError("auxiliary short-term loss requires frame labels and auxiliary heads")
        short = np.asarray(frame_labels)[:, config.long_len :]
        terms["aux_verb"] = F.cross_entropy(output.aux_verb_logits, short[..., 0])
        terms["aux_noun"] = F.cross_entropy(output.aux_noun_logits, short[..., 1])
    names = list(terms)
    total = terms[names[0]]
    for name in names[1:]:
        total = total + terms[name]
    return total, {name: float(t.data) for name, t in terms.items()}
