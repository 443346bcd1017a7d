"""Miniature end-to-end supervised run: data -> two models -> self-play.

Sizes default small enough for a couple of minutes of CPU; crank
--records/--epochs/--hidden up toward the full desk scale when you have
the time.  Checkpoints land next to --out so play_one_game.py can reuse
them.
"""

import argparse
import os
import time

from guessgame import engine, training, world
from guessgame.config import ModelConfig, TrainConfig
from guessgame.model import GuesserModel, QgenModel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--records", type=int, default=1_500)
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--hidden", type=int, default=48)
    ap.add_argument("--eval-games", type=int, default=200)
    ap.add_argument("--out", default="demo_run")
    args = ap.parse_args()

    cfg_m = ModelConfig(d_word=24, d_h=args.hidden, d_v=32, k=8,
                        max_len=6, category_emb=12)
    cfg = TrainConfig(lr=1e-3, batch_size=16, epochs=args.epochs,
                      seed=0, model=cfg_m)

    t0 = time.time()
    train = [world.make_record(s, k=cfg_m.k, d_v=cfg_m.d_v)
             for s in range(args.records)]
    held = [world.make_record(20_000 + s, k=cfg_m.k, d_v=cfg_m.d_v)
            for s in range(200)]
    print(f"built {len(train)}+{len(held)} records in {time.time()-t0:.0f}s")

    qgen = QgenModel(cfg_m, seed=1)
    for row in training.sl_train_qgen(qgen, train, cfg, val_records=held):
        print(f"  qgen epoch {row['epoch']}: train {row['train_loss']:.3f}"
              f"  val {row['val_loss']:.3f}")
    guesser = GuesserModel(cfg_m, seed=2)
    for row in training.sl_train_guesser(guesser, train, cfg,
                                         val_records=held):
        print(f"  guesser epoch {row['epoch']}: train {row['train_loss']:.3f}"
              f"  val error {row['val_error']:.3f}")

    games = [world.make_record(30_000 + s, k=cfg_m.k, d_v=cfg_m.d_v)
             for s in range(args.eval_games)]
    summary, _ = engine.evaluate(qgen, guesser, games)
    print(f"self-play success {summary.success_rate:.3f} "
          f"[{summary.ci_low:.3f}, {summary.ci_high:.3f}] "
          f"over {summary.n_games} games (chance {1 / cfg_m.k:.3f})")

    os.makedirs(args.out, exist_ok=True)
    qgen.save(os.path.join(args.out, "qgen.json"))
    guesser.save(os.path.join(args.out, "guesser.json"))
    print(f"checkpoints saved under {args.out}/  "
          f"total {time.time()-t0:.0f}s")


if __name__ == "__main__":
    main()
