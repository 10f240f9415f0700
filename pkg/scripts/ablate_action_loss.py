"""Train with and without the direct action loss and compare argmax edit distances.

    python scripts/ablate_action_loss.py --out-dir runs/ablation

Uses the same synthetic world and desk model as desk_experiment.py. Each row is
decoded in argmax mode without the interaction step; the action-loss row reads
its pairs off the action head.
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from querymamba.dataio import generate_split, generate_world
from querymamba.interaction import build_cooccurrence, build_taxonomy
from querymamba.pipeline import DataConfig, TrainConfig, run_ablation_table1, write_ablation


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--train-clips", type=int, default=500)
    ap.add_argument("--val-clips", type=int, default=200)
    ap.add_argument("--cuts-per-clip", type=int, default=8)
    ap.add_argument("--layers", type=int, default=2)
    ap.add_argument("--out-dir", default=".")
    args = ap.parse_args()

    data = DataConfig(seed=args.seed)
    cfg = TrainConfig(seed=args.seed, epochs=args.epochs, layers_enc=args.layers, layers_dec=args.layers,
                      memory_pos_encoding=True)
    world = generate_world(data.seed, data.num_verbs, data.num_nouns, data.sparsity, feature_dim=data.d_input,
                           noise_std=data.noise_std, successors=data.successors, leak=data.leak)
    split = dict(long_len=cfg.long_len, short_len=cfg.short_len, num_future=cfg.num_future)
    train_ann, _, train_ex = generate_split(world, args.train_clips, args.seed, "train", cuts_per_clip=args.cuts_per_clip, **split)
    _, _, val_ex = generate_split(world, args.val_clips, args.seed, "val", **split)
    taxonomy = build_taxonomy(build_cooccurrence((p for a in train_ann for p in a.pairs), data.num_verbs, data.num_nouns))
    print(f"world: {world.num_actions} actions, taxonomy {len(taxonomy)}; {len(train_ex)} train / {len(val_ex)} val examples")

    start = time.time()
    rows = run_ablation_table1(cfg, train_ex, val_ex, taxonomy)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_ablation(out, rows)
    print(f"{'loss terms':24s} {'verb':>7s} {'noun':>7s} {'action':>7s}")
    for r in rows:
        name = "verb + noun + action" if r.loss_action else "verb + noun"
        print(f"{name:24s} {r.verb_ed:7.4f} {r.noun_ed:7.4f} {r.action_ed:7.4f}")
    print(f"total {time.time() - start:.0f}s; wrote {out / 'ablation.json'}")


if __name__ == "__main__":
    main()
