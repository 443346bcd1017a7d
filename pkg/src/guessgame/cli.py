"""Command-line entry points.

Every verb is reproducible from its config and seed alone; artifacts land
in a per-run directory named by timestamp and seed.  Exit codes: 0 on
success, 2 for configuration problems (bad flags, bad config file), 3 for
runtime failures (missing files, malformed data).
"""

import argparse
import json
import os
import statistics
import sys
import time

import numpy as np

from . import engine, training, world
from .config import ConfigError, apply_ablation, load_config
from .model import GuesserModel, QgenModel


def _make_run_dir(base, seed):
    stamp = time.strftime("%Y%m%d-%H%M%S")
    path = os.path.join(base, f"{stamp}-seed{seed}")
    os.makedirs(path, exist_ok=True)
    return path


SPLIT_FILES = {"new_game": "test_new_game", "new_object": "test_new_object"}


def _load_split(data_dir, split, d_v):
    path = os.path.join(data_dir, f"{SPLIT_FILES.get(split, split)}.jsonl")
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing split file {path}")
    records = world.read_jsonl(path, d_v=d_v)
    if not records:
        raise ValueError(f"split {split} at {path} is empty")
    return records


def _dump_config(cfg, run_dir):
    from .config import config_to_json
    with open(os.path.join(run_dir, "config.json"), "w") as fh:
        json.dump(config_to_json(cfg), fh, indent=2)


def cmd_gen_data(args):
    paths = world.generate_dataset(args.out, args.n_train, args.n_val,
                                   args.n_test, k=args.k, d_v=args.d_v,
                                   max_turns=args.max_turns,
                                   base_seed=args.base_seed)
    for split, path in paths.items():
        print(f"{split}: {path}")
    return 0


def cmd_train_qgen(args):
    cfg = load_config(args.config, args.override)
    run_dir = _make_run_dir(args.run_dir, cfg.seed)
    _dump_config(cfg, run_dir)
    train = _load_split(args.data, "train", cfg.model.d_v)
    val = _load_split(args.data, "val", cfg.model.d_v)
    model = QgenModel(cfg.ablated_model(), seed=cfg.seed)
    history = training.sl_train_qgen(
        model, train, cfg, val_records=val,
        log_path=os.path.join(run_dir, "train_log.csv"))
    ckpt = os.path.join(run_dir, "qgen.json")
    model.save(ckpt)
    last = history[-1]
    print(f"run_dir: {run_dir}")
    print(f"checkpoint: {ckpt}")
    print(f"final train loss {last['train_loss']:.4f}, "
          f"val loss {last['val_loss']:.4f}")
    return 0


def cmd_train_guesser(args):
    cfg = load_config(args.config, args.override)
    run_dir = _make_run_dir(args.run_dir, cfg.seed)
    _dump_config(cfg, run_dir)
    train = _load_split(args.data, "train", cfg.model.d_v)
    val = _load_split(args.data, "val", cfg.model.d_v)
    model = GuesserModel(cfg.ablated_model(), seed=cfg.seed)
    history = training.sl_train_guesser(
        model, train, cfg, val_records=val,
        log_path=os.path.join(run_dir, "train_log.csv"))
    ckpt = os.path.join(run_dir, "guesser.json")
    model.save(ckpt)
    last = history[-1]
    print(f"run_dir: {run_dir}")
    print(f"checkpoint: {ckpt}")
    print(f"final train loss {last['train_loss']:.4f}, "
          f"val error {last['val_error']:.4f}")
    return 0


def cmd_rl_finetune(args):
    cfg = load_config(args.config, args.override)
    run_dir = _make_run_dir(args.run_dir, cfg.seed)
    _dump_config(cfg, run_dir)
    qgen = QgenModel.load(args.qgen)
    guesser = GuesserModel.load(args.guesser)
    history = training.rl_train_qgen(
        qgen, guesser, cfg, log_path=os.path.join(run_dir, "rl_log.csv"))
    ckpt = os.path.join(run_dir, "qgen_rl.json")
    qgen.save(ckpt)
    print(f"run_dir: {run_dir}")
    print(f"checkpoint: {ckpt}")
    if history:
        print(f"final self-play success {history[-1]['success_rate']:.4f}")
    return 0


def cmd_eval(args):
    qgen = QgenModel.load(args.qgen)
    guesser = GuesserModel.load(args.guesser)
    records = _load_split(args.data, args.split, qgen.cfg.d_v)
    if args.n_games:
        records = records[:args.n_games]
    train_seeds = None
    if args.split == "new_game":
        train_path = os.path.join(args.data, "train.jsonl")
        if os.path.exists(train_path):
            train_seeds = {r.scene.seed
                           for r in world.read_jsonl(train_path,
                                                     d_v=qgen.cfg.d_v)}
    summary, results = engine.evaluate(qgen, guesser, records,
                                       strategy=args.strategy,
                                       max_rounds=args.max_rounds,
                                       seed=args.seed,
                                       train_seeds=train_seeds)
    print(f"split={args.split} strategy={args.strategy} n={summary.n_games}")
    print(f"success_rate={summary.success_rate:.4f} "
          f"ci95=[{summary.ci_low:.4f}, {summary.ci_high:.4f}]")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        engine.write_results_jsonl(os.path.join(args.out, "episodes.jsonl"),
                                   results)
        engine.write_summary_csv(os.path.join(args.out, "summary.csv"),
                                 [(args.split, summary)])
        print(f"results under {args.out}")
    return 0


ABLATION_ROWS = (("full", ()), ("w/o SO", ("SO",)),
                 ("w/o ADFA", ("ADFA",)), ("w/o CVIF", ("CVIF",)))


def cmd_ablate(args):
    cfg = load_config(args.config, args.override)
    run_dir = _make_run_dir(args.run_dir, cfg.seed)
    _dump_config(cfg, run_dir)
    train = _load_split(args.data, "train", cfg.model.d_v)
    val = _load_split(args.data, "val", cfg.model.d_v)
    eval_records = val[:args.n_games] if args.n_games else val
    seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    guessers = {}
    for seed in seeds:
        guesser = GuesserModel(cfg.model, seed=seed)
        training.sl_train_guesser(guesser, train, cfg)
        guessers[seed] = guesser
    table = []
    for label, parts in ABLATION_ROWS:
        rates = []
        for seed in seeds:
            model_cfg = apply_ablation(cfg.model, parts)
            qgen = QgenModel(model_cfg, seed=seed)
            training.sl_train_qgen(qgen, train, cfg)
            summary, _ = engine.evaluate(qgen, guessers[seed], eval_records,
                                         max_rounds=cfg.max_rounds)
            rates.append(summary.success_rate)
        table.append((label, statistics.median(rates), rates))
    print(f"run_dir: {run_dir}")
    print(f"{'variant':<10} {'success':>8}  per-seed")
    for label, med, rates in table:
        per_seed = " ".join(f"{r:.4f}" for r in rates)
        print(f"{label:<10} {med:>8.4f}  {per_seed}")
    with open(os.path.join(run_dir, "ablation.csv"), "w") as fh:
        fh.write("variant,median_success," +
                 ",".join(f"seed{s}" for s in seeds) + "\n")
        for label, med, rates in table:
            fh.write(",".join([label, f"{med:.4f}"] +
                              [f"{r:.4f}" for r in rates]) + "\n")
    return 0


def cmd_trace(args):
    qgen = QgenModel.load(args.qgen)
    guesser = GuesserModel.load(args.guesser)
    scene = world.generate_scene(args.episode, qgen.cfg.k, qgen.cfg.d_v)
    target = args.target
    if target is None:
        target = int(np.random.default_rng([args.episode, 2]).integers(scene.k))
    result = engine.play_episode(scene, target, qgen, guesser,
                                 strategy=args.strategy,
                                 max_rounds=args.max_rounds)
    payload = result.to_json()
    payload["episode"] = args.episode
    payload["scene"] = {"seed": scene.seed, "k": scene.k,
                        "objects": [world.object_to_json(o)
                                    for o in scene.objects]}
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"trace written to {args.out}")
    else:
        print(text)
    return 0


def cmd_serve(args):
    import uvicorn

    from .server import create_app
    app = create_app(args.qgen, args.guesser, max_rounds=args.max_rounds,
                     console_dir=args.console_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="guessgame",
        description="Goal-oriented visual dialogue on a synthetic world: "
                    "data generation, training, evaluation, and serving.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen-data", help="write scripted-dialogue JSONL splits")
    p.add_argument("--out", required=True)
    p.add_argument("--n-train", type=int, default=10000)
    p.add_argument("--n-val", type=int, default=500)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--d-v", type=int, default=32)
    p.add_argument("--max-turns", type=int, default=8)
    p.add_argument("--base-seed", type=int, default=1)
    p.set_defaults(func=cmd_gen_data)

    for verb, func in (("train-qgen", cmd_train_qgen),
                       ("train-guesser", cmd_train_guesser)):
        p = sub.add_parser(verb, help=f"supervised training ({verb[6:]})")
        p.add_argument("--data", required=True, help="dataset directory")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("-o", "--override", action="append", default=[],
                       metavar="SECTION.FIELD=VALUE")
        p.add_argument("--run-dir", default="runs")
        p.set_defaults(func=func)

    p = sub.add_parser("rl-finetune",
                       help="policy-gradient fine-tuning of a questioner")
    p.add_argument("--qgen", required=True, help="supervised checkpoint")
    p.add_argument("--guesser", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("-o", "--override", action="append", default=[])
    p.add_argument("--run-dir", default="runs")
    p.set_defaults(func=cmd_rl_finetune)

    p = sub.add_parser("eval", help="self-play success on a dataset split")
    p.add_argument("--qgen", required=True)
    p.add_argument("--guesser", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="new_game",
                   choices=["train", "val", "new_game", "new_object"])
    p.add_argument("--strategy", default="greedy",
                   choices=["greedy", "sample", "beam"])
    p.add_argument("--n-games", type=int, default=0,
                   help="cap the number of games (0 = whole split)")
    p.add_argument("--max-rounds", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None,
                   help="directory for episodes.jsonl + summary.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate",
                       help="train and score the full model and its three "
                            "reduced variants")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("-o", "--override", action="append", default=[])
    p.add_argument("--run-dir", default="runs")
    p.add_argument("--seeds", default="0",
                   help="comma-separated training seeds; the table reports "
                        "the median")
    p.add_argument("--n-games", type=int, default=0)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("trace",
                       help="play one episode and dump its per-turn "
                            "attention JSON")
    p.add_argument("--qgen", required=True)
    p.add_argument("--guesser", required=True)
    p.add_argument("--episode", type=int, required=True,
                   help="scene seed of the episode")
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--strategy", default="greedy",
                   choices=["greedy", "sample", "beam"])
    p.add_argument("--max-rounds", type=int, default=8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("serve", help="run the oracle HTTP API")
    p.add_argument("--qgen", required=True)
    p.add_argument("--guesser", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-rounds", type=int, default=8)
    p.add_argument("--console-dir", default=None,
                   help="static directory to mount at /console")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, IndexError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
