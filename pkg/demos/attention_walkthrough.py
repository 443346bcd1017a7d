"""Replay a scripted dialogue and print the attention bookkeeping per turn.

Shows how each answer reshapes the object attention: the sharpened
relevance vector P, the answer mask M, the question- and history-side
distributions, and the fusion weight lambda.  Works with an untrained
model (the mechanics are the point), but a trained checkpoint makes the
focusing much more legible.
"""

import argparse

import numpy as np

from guessgame import world
from guessgame.model import GuesserModel


def fmt(vec, digits=2):
    if vec is None:
        return "-"
    return "[" + " ".join(f"{v:.{digits}f}" for v in np.asarray(vec)) + "]"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--guesser", help="guesser checkpoint (JSON)")
    ap.add_argument("--seed", type=int, default=123)
    ap.add_argument("--target", type=int, default=2)
    args = ap.parse_args()

    model = GuesserModel.load(args.guesser) if args.guesser \
        else GuesserModel(seed=0)
    scene = world.generate_scene(args.seed, model.cfg.k, model.cfg.d_v)
    dialogue = world.sample_human_dialogue(scene, args.target,
                                           seed=args.seed)

    print(f"scene seed={args.seed}, target #{args.target} "
          f"({world.CATEGORIES[scene.objects[args.target].category]})")
    state, traces = model.run_dialogue(scene, dialogue)
    for (tokens, answer), tr in zip(dialogue, traces):
        text = " ".join(world.VOCAB.name(t) for t in tokens[:-1])
        print(f"\nturn {tr.turn}: \"{text}\" -> {answer.label}")
        print(f"  alpha_q {fmt(tr.alpha_q)}")
        print(f"  P       {fmt(tr.p, 0)}")
        print(f"  M       {fmt(tr.m, 0)}")
        print(f"  att_q   {fmt(tr.att_q)}")
        print(f"  att_h   {fmt(tr.att_h)}")
        print(f"  att     {fmt(tr.att)}  (mass {np.sum(tr.att):.2f})")
        lam = "-" if tr.lam is None else f"{tr.lam:.3f}"
        print(f"  lambda  {lam}   focus -> object #{tr.selected}")

    probs, predicted = model.guess(state, scene)
    print(f"\nguess distribution {fmt(probs.values)}")
    print(f"predicted #{predicted}, target #{args.target}")


if __name__ == "__main__":
    main()
