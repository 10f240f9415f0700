"""Command line entry point: ``querymamba <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataio import SyntheticWorldSpec, generate_split, generate_world, load_split, read_annotations, read_truths, write_split
from .interaction import build_cooccurrence, build_taxonomy, load_cooccurrence, load_taxonomy, save_cooccurrence, save_taxonomy
from .metrics import evaluate_dataset, read_predictions, write_predictions
from .pipeline import Checkpoint, infer, load_config, run_ablation_table1, train, write_ablation, write_loss_curve
from .pipeline.config import ConfigError

log = logging.getLogger("querymamba")


def _configs(args):
    overrides = {} if args.seed is None else {"seed": args.seed}
    return load_config(args.config, overrides)


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _vocab_from(split_dir: Path) -> tuple[int, int]:
    anns = read_annotations(split_dir / "annotations.jsonl")
    if not anns:
        raise ConfigError(f"{split_dir}: no annotations")
    return anns[0].num_verbs, anns[0].num_nouns


def _data_config(train_cfg, split_dir: Path):
    """Train config with vocabulary and feature width taken from the data."""
    V, N = _vocab_from(split_dir)
    index = json.loads((split_dir / "examples.jsonl").open().readline())
    sidecar = json.loads((split_dir / "features" / f"{index['clip_id']}.json").read_text())
    return train_cfg.replace(num_verbs=V, num_nouns=N, d_input=int(sidecar["shape"][1]), num_future=len(index["targets"]))


def _load_examples(cfg, split_dir: Path):
    return load_split(split_dir, cfg.long_len, cfg.short_len, cfg.num_future)


def cmd_gen_world(args) -> None:
    _, data = _configs(args)
    world = generate_world(data.seed, data.num_verbs, data.num_nouns, data.sparsity, feature_dim=data.d_input,
                           noise_std=data.noise_std, successors=data.successors, leak=data.leak, two_stream=data.two_stream)
    path = _out(args) / "world.json"
    world.save(path)
    print(f"{path}: {world.num_actions} permitted actions")


def cmd_gen_data(args) -> None:
    _, data = _configs(args)
    world = SyntheticWorldSpec.load(args.world)
    out = _out(args)
    split = dict(long_len=data.long_len, short_len=data.short_len, num_future=data.num_future)
    for name, count, cuts in (("train", data.train_clips, data.cuts_per_clip), ("val", data.val_clips, 1)):
        anns, feats, exs = generate_split(world, count, data.seed, name, cuts_per_clip=cuts, **split)
        write_split(out / name, anns, feats, exs)
        print(f"{out / name}: {len(anns)} clips, {len(exs)} examples")


def cmd_build_cooc(args) -> None:
    anns = read_annotations(args.annotations)
    V, N = anns[0].num_verbs, anns[0].num_nouns
    cooc = build_cooccurrence((p for a in anns for p in a.pairs), V, N, smoothing=args.smoothing, split=args.split)
    path = _out(args) / "cooc.csv"
    save_cooccurrence(path, cooc)
    print(f"{path}: {int((cooc.counts > 0).sum())} observed pairs from {int(cooc.counts.sum())} events")


def cmd_build_taxonomy(args) -> None:
    taxonomy = build_taxonomy(load_cooccurrence(args.cooc))
    path = _out(args) / "taxonomy.csv"
    save_taxonomy(path, taxonomy)
    print(f"{path}: {len(taxonomy)} actions")


def cmd_train(args) -> None:
    cfg, _ = _configs(args)
    data_dir = Path(args.data)
    cfg = _data_config(cfg, data_dir)
    taxonomy = load_taxonomy(args.taxonomy) if args.taxonomy else None
    examples = _load_examples(cfg, data_dir)
    out = _out(args)

    def report(rec):
        if rec["step"] % args.log_every == 0:
            log.info("step %d epoch %d loss %.4f lr %.2e", rec["step"], rec["epoch"], rec["loss"], rec["lr"])

    result = train(cfg, examples, taxonomy, callback=report)
    result.checkpoint.save(out / "checkpoint.npz")
    write_loss_curve(out / "loss_curve.csv", result.loss_curve)
    print(f"{out / 'checkpoint.npz'}: {result.checkpoint.step} steps, final loss {result.loss_curve[-1]['loss']:.4f}")


def cmd_infer(args) -> None:
    ckpt = Checkpoint.load(args.checkpoint)
    model = ckpt.model()
    cfg = model.config
    use_interaction = cfg.use_interaction and not args.no_interaction
    cooc = None
    if use_interaction:
        if not args.cooc:
            raise ConfigError("interaction is enabled: pass --cooc or --no-interaction")
        cooc = load_cooccurrence(args.cooc)
    examples = _load_examples(cfg, Path(args.data))
    preds = infer(model, examples, use_interaction, cooc, K=args.K, mode=args.mode, seed=args.seed)
    path = _out(args) / "predictions.jsonl"
    write_predictions(path, preds)
    print(f"{path}: {len(preds)} clips")


def cmd_eval(args) -> None:
    report = evaluate_dataset(read_predictions(args.predictions), read_truths(args.data))
    path = _out(args) / "report.json"
    report.write(path)
    print(json.dumps(report.to_json()))


def cmd_ablate(args) -> None:
    cfg, _ = _configs(args)
    cfg = _data_config(cfg, Path(args.train))
    taxonomy = load_taxonomy(args.taxonomy)
    rows = run_ablation_table1(cfg, _load_examples(cfg, Path(args.train)), _load_examples(cfg, Path(args.val)), taxonomy)
    out = _out(args)
    write_ablation(out, rows)
    print(f"{'verb':>5s} {'noun':>5s} {'action':>6s} | {'Verb':>7s} {'Noun':>7s} {'Action':>7s}")
    for r in rows:
        marks = ["x" if f else "-" for f in (r.loss_verb, r.loss_noun, r.loss_action)]
        print(f"{marks[0]:>5s} {marks[1]:>5s} {marks[2]:>6s} | {r.verb_ed:7.4f} {r.noun_ed:7.4f} {r.action_ed:7.4f}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out-dir", default=".", help="directory for outputs (default: .)")

    parser = argparse.ArgumentParser(prog="querymamba", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-world", parents=[common], help="sample a synthetic world -> world.json")
    p.set_defaults(fn=cmd_gen_world)

    p = sub.add_parser("gen-data", parents=[common], help="generate train/ and val/ splits from a world")
    p.add_argument("--world", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("build-cooc", parents=[common], help="co-occurrence counts from annotations -> cooc.csv")
    p.add_argument("--annotations", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--smoothing", type=float, default=0.0)
    p.set_defaults(fn=cmd_build_cooc)

    p = sub.add_parser("build-taxonomy", parents=[common], help="observed verb-noun pairs -> taxonomy.csv")
    p.add_argument("--cooc", required=True)
    p.set_defaults(fn=cmd_build_taxonomy)

    p = sub.add_parser("train", parents=[common], help="train on a split -> checkpoint.npz, loss_curve.csv")
    p.add_argument("--data", required=True, help="split directory")
    p.add_argument("--taxonomy", help="needed when loss_action = true")
    p.add_argument("--log-every", type=int, default=25)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="candidate sequences -> predictions.jsonl")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--cooc")
    p.add_argument("--no-interaction", action="store_true")
    p.add_argument("--mode", choices=["sample", "argmax"])
    p.add_argument("--K", type=int)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("eval", parents=[common], help="edit distances of predictions -> report.json")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data", required=True, help="split directory holding examples.jsonl")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate-action-loss", parents=[common], help="train with/without action loss -> ablation.json")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--taxonomy", required=True)
    p.set_defaults(fn=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
