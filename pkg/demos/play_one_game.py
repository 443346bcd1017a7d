"""Play one self-play game and narrate it turn by turn.

With --qgen/--guesser pointing at trained checkpoints this shows the real
system; without them it falls back to freshly initialized models, which
still exercises the full pipeline (the questions are just gibberish-ish).
"""

import argparse

import numpy as np

from guessgame import engine, world
from guessgame.model import GuesserModel, QgenModel


def bar(weight, width=24):
    return "#" * int(round(weight * width))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--qgen", help="qgen checkpoint (JSON)")
    ap.add_argument("--guesser", help="guesser checkpoint (JSON)")
    ap.add_argument("--seed", type=int, default=30_901, help="scene seed")
    ap.add_argument("--target", type=int, default=None)
    ap.add_argument("--rounds", type=int, default=8)
    args = ap.parse_args()

    qgen = QgenModel.load(args.qgen) if args.qgen else QgenModel(seed=1)
    guesser = GuesserModel.load(args.guesser) if args.guesser \
        else GuesserModel(seed=2)
    scene = world.generate_scene(args.seed, qgen.cfg.k, qgen.cfg.d_v)
    target = args.target
    if target is None:
        target = int(np.random.default_rng(args.seed).integers(scene.k))

    print(f"scene seed={args.seed}  target=#{target}")
    for i, obj in enumerate(scene.objects):
        mark = "*" if i == target else " "
        print(f" {mark} #{i}: {world.CATEGORIES[obj.category]:<7s} "
              f"{world.COLORS[obj.color]:<7s} {world.SIZES[obj.size]:<7s} "
              f"quadrant {world.QUADRANTS[world.quadrant_id(obj)]}")

    result = engine.play_episode(scene, target, qgen, guesser,
                                 max_rounds=args.rounds)
    print()
    for (tokens, answer), trace in zip(result.transcript, result.traces):
        body = tokens[:-1] if tokens and tokens[-1] == world.VOCAB.stop \
            else tokens
        text = " ".join(world.VOCAB.name(t) for t in body)
        print(f"turn {trace.turn}: {text:<24s} -> {answer.label}")
        att = np.asarray(trace.att)
        for i, w in enumerate(att / att.sum()):
            print(f"    #{i} {bar(w)} {w:.2f}")
    print()
    dist = ", ".join(f"#{i}:{p:.2f}"
                     for i, p in enumerate(result.guess_distribution))
    print(f"guess distribution: {dist}")
    verdict = "correct" if result.success else f"wrong (target was #{target})"
    print(f"guess: #{result.predicted} -> {verdict}")


if __name__ == "__main__":
    main()
