"""Desk-scale end-to-end run on a synthetic world.

Trains the forecaster, then compares validation edit distances of
  * the per-slot marginal-frequency baseline,
  * the model with independent verb/noun sampling,
  * the model with co-occurrence-adjusted joint sampling.

    python scripts/desk_experiment.py

Defaults match the learning-sanity acceptance run.
"""

from __future__ import annotations

import argparse
import time

from querymamba.dataio import generate_split, generate_world
from querymamba.interaction import build_cooccurrence
from querymamba.metrics import evaluate_dataset
from querymamba.pipeline import TrainConfig, baseline_distributions, decode, predict_distributions, train, truths_of


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--train-clips", type=int, default=500)
    ap.add_argument("--val-clips", type=int, default=200)
    ap.add_argument("--cuts-per-clip", type=int, default=8)
    ap.add_argument("--lr", type=float, default=2e-3)
    ap.add_argument("--sparsity", type=float, default=0.2)
    ap.add_argument("--layers", type=int, default=2, help="encoder and decoder depth")
    ap.add_argument("--d-model", type=int, default=None)
    ap.add_argument("--batch-size", type=int, default=None)
    ap.add_argument("--no-memory-pos", action="store_true", help="drop sinusoidal positions on decoder memory keys")
    ap.add_argument("--weight-decay", type=float, default=None)
    args = ap.parse_args()

    cfg = TrainConfig(seed=args.seed, epochs=args.epochs, lr=args.lr)
    if args.layers:
        cfg = cfg.replace(layers_enc=args.layers, layers_dec=args.layers)
    if args.d_model:
        cfg = cfg.replace(d_model=args.d_model)
    if args.batch_size:
        cfg = cfg.replace(batch_size=args.batch_size)
    cfg = cfg.replace(memory_pos_encoding=not args.no_memory_pos)
    if args.weight_decay is not None:
        cfg = cfg.replace(weight_decay=args.weight_decay)
    world = generate_world(args.seed, cfg.num_verbs, cfg.num_nouns, args.sparsity, feature_dim=cfg.d_input)
    split = dict(long_len=cfg.long_len, short_len=cfg.short_len, num_future=cfg.num_future)
    train_ann, _, train_ex = generate_split(world, args.train_clips, args.seed, "train", cuts_per_clip=args.cuts_per_clip, **split)
    _, _, val_ex = generate_split(world, args.val_clips, args.seed, "val", **split)
    cooc = build_cooccurrence((p for a in train_ann for p in a.pairs), cfg.num_verbs, cfg.num_nouns)
    print(f"world: {world.num_actions} actions; {len(train_ex)} train / {len(val_ex)} val examples")

    start = time.time()

    def log(rec):
        if rec["step"] % 25 == 0:
            print(f"  step {rec['step']:4d} loss {rec['loss']:.4f} lr {rec['lr']:.2e} ({time.time() - start:.0f}s)", flush=True)

    result = train(cfg, train_ex, callback=log)
    truths = truths_of(val_ex)
    dists = predict_distributions(result.model, val_ex)
    base = baseline_distributions(train_ex, val_ex, cfg.num_verbs, cfg.num_nouns)
    K = cfg.num_candidates
    rows = {
        "marginal baseline": evaluate_dataset(decode(base, K, seed=args.seed), truths),
        "baseline, interaction": evaluate_dataset(decode(base, K, cooc=cooc, seed=args.seed), truths),
        "model, independent": evaluate_dataset(decode(dists, K, seed=args.seed), truths),
        "model, interaction": evaluate_dataset(decode(dists, K, cooc=cooc, seed=args.seed), truths),
        "model, argmax": evaluate_dataset(decode(dists, mode="argmax"), truths),
    }
    print(f"{'':22s} {'verb':>7s} {'noun':>7s} {'action':>7s}")
    for name, r in rows.items():
        print(f"{name:22s} {r.verb_ed:7.4f} {r.noun_ed:7.4f} {r.action_ed:7.4f}")
    print(f"total {time.time() - start:.0f}s")


if __name__ == "__main__":
    main()
