"""Training loop and checkpoints."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..dataio.clips import Example
from ..interaction import ActionTaxonomy
from ..numerics.optim import AdamW, clip_grad_norm, cosine_lr
from ..numerics.rng import make_rng
from ..numerics.tensor import default_dtype
from .config import TrainConfig, build
from .losses import compute_loss
from .model import QueryMamba

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Batch:
    M: np.ndarray
    mask: np.ndarray
    targets: np.ndarray
    frame_labels: np.ndarray
    ids: list[str]


def collate(examples: Sequence[Example]) -> Batch:
    return Batch(
        M=np.stack([ex.memory.M for ex in examples]),
        mask=np.stack([ex.memory.mask for ex in examples]),
        targets=np.stack([ex.targets for ex in examples]),
        frame_labels=np.stack([ex.frame_labels for ex in examples]),
        ids=[ex.example_id for ex in examples],
    )


def build_model(config: TrainConfig, num_actions: int = 0) -> QueryMamba:
    with default_dtype(config.dtype):
        return QueryMamba(config, num_actions)


@dataclass
class Checkpoint:
    weights: dict[str, np.ndarray]
    config: TrainConfig
    num_actions: int = 0
    taxonomy: list[tuple[int, int]] | None = None
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    rng_state: dict | None = None
    epoch: int = 0
    step: int = 0
    losses: list[dict] = field(default_factory=list)

    def save(self, path: str | Path) -> None:
        """Write atomically: temp file in the target directory, then rename."""
        path = Path(path)
        meta = {
            "config": self.config.to_dict(),
            "num_actions": self.num_actions,
            "taxonomy": self.taxonomy,
            "rng_state": self.rng_state,
            "epoch": self.epoch,
            "step": self.step,
            "losses": self.losses,
        }
        arrays = {f"w/{k}": v for k, v in self.weights.items()}
        arrays.update({f"opt/{k}": v for k, v in self.optimizer.items()})
        arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(buf.getvalue())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | Path) -> Checkpoint:
        with np.load(Path(path)) as data:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
            weights = {k[2:]: data[k] for k in data.files if k.startswith("w/")}
            optimizer = {k[4:]: data[k] for k in data.files if k.startswith("opt/")}
        taxonomy = meta["taxonomy"]
        return cls(
            weights=weights,
            config=build(TrainConfig, meta["config"]),
            num_actions=meta["num_actions"],
            taxonomy=[tuple(p) for p in taxonomy] if taxonomy is not None else None,
            optimizer=optimizer,
            rng_state=meta["rng_state"],
            epoch=meta["epoch"],
            step=meta["step"],
            losses=meta["losses"],
        )

    def model(self) -> QueryMamba:
        model = build_model(self.config, self.num_actions)
        model.load_state_dict(self.weights)
        return model


@dataclass
class TrainResult:
    model: QueryMamba
    checkpoint: Checkpoint
    loss_curve: list[dict]


def train(
    config: TrainConfig,
    examples: Sequence[Example],
    taxonomy: ActionTaxonomy | None = None,
    callback: Callable[[dict], None] | None = None,
) -> TrainResult:
    """AdamW with cosine decay and global-norm clipping over shuffled mini-batches.

    Runs ``config.epochs`` epochs, or exactly ``config.max_steps`` steps when
    that is positive. Deterministic for a fixed config and example order.
    """
    if not examples:
        raise ValueError("cannot train on an empty dataset")
    num_actions = len(taxonomy) if (taxonomy is not None and config.loss_action) else 0
    model = build_model(config, num_actions)
    params = model.parameters()
    opt = AdamW(params, lr=config.lr, betas=(config.beta1, config.beta2), weight_decay=config.weight_decay)
    rng = make_rng(config.seed, "train", "shuffle")
    n = len(examples)
    bs = min(config.batch_size, n)
    steps_per_epoch = math.ceil(n / bs)
    total = config.max_steps if config.max_steps > 0 else config.epochs * steps_per_epoch
    curve: list[dict] = []
    step = epoch = 0
    while step < total:
        order = rng.permutation(n)
        for start in range(0, n, bs):
            if step >= total:
                break
            batch = collate([examples[i] for i in order[start : start + bs]])
            lr = cosine_lr(step, total, config.lr) if config.cosine_decay else config.lr
            with default_dtype(config.dtype):
                out = model(batch.M, batch.mask)
                loss, parts = compute_loss(out, batch.targets, config, taxonomy, batch.frame_labels)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss {value} at step {step} (epoch {epoch}, lr {lr:.3g}); terms {parts}")
            opt.zero_grad()
            loss.backward()
            grad_norm = clip_grad_norm(params, config.grad_clip)
            opt.step(lr)
            record = {"step": step, "epoch": epoch, "loss": value, **parts, "grad_norm": grad_norm, "lr": lr}
            curve.append(record)
            if callback is not None:
                callback(record)
            step += 1
        epoch += 1
    ckpt = Checkpoint(
        weights=model.state_dict(),
        config=config,
        num_actions=num_actions,
        taxonomy=list(taxonomy.pairs) if num_actions else None,
        optimizer=opt.state_dict(),
        rng_state=rng.bit_generator.state,
        epoch=epoch,
        step=step,
        losses=curve[-min(len(curve), 50) :],
    )
    return TrainResult(model, ckpt, curve)


def write_loss_curve(path: str | Path, curve: Sequence[dict]) -> None:
    columns: list[str] = []
    for rec in curve:
        columns += [k for k in rec if k not in columns]
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for rec in curve:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})
