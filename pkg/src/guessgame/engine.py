"""Episode orchestration: question loop, oracle, guess, and evaluation.

One episode runs the questioner against the rule-based oracle for up to
`max_rounds` QA rounds (a generated stop-only question ends the loop
early), then hands the transcript to the guesser.  Both models replay the
same transcript through their own state estimators.
"""

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import world
from .model import GuesserModel, QgenModel
from .world import VOCAB


@dataclass
class EpisodeResult:
    transcript: list          # [(token ids, Answer), ...]
    guess_distribution: list  # probabilities over the K candidates
    predicted: int
    target: int
    success: bool
    traces: list              # questioner-side TurnTrace per transcript entry

    def to_json(self):
        return {
            "transcript": [{"tokens": [VOCAB.name(t) for t in toks],
                            "answer": ans.label}
                           for toks, ans in self.transcript],
            "guess_distribution": self.guess_distribution,
            "predicted": self.predicted,
            "target": self.target,
            "success": self.success,
            "traces": [tr.to_json() for tr in self.traces],
        }


@dataclass
class EvalSummary:
    n_games: int
    n_success: int
    success_rate: float
    ci_low: float
    ci_high: float

    def to_json(self):
        return {"n_games": self.n_games, "n_success": self.n_success,
                "success_rate": self.success_rate,
                "ci_low": self.ci_low, "ci_high": self.ci_high}


def _as_model(obj, cls):
    if isinstance(obj, (str, os.PathLike)):
        return cls.load(obj)
    return obj


def play_episode(scene, target, qgen, guesser, strategy="greedy",
                 max_rounds=8, rng=None, training=False, collect=None,
                 oracle=world.oracle_answer):
    """Run one full game on `scene`; returns an EpisodeResult.

    `qgen`/`guesser` may be model instances or checkpoint paths.  `collect`
    is forwarded to the decoder so sampled-token log-probabilities stay
    available for policy gradients.  The recorded traces are the
    questioner's: they describe the belief the questions were asked under.
    """
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be at least 1, got {max_rounds}")
    if not 0 <= target < scene.k:
        raise IndexError(f"target {target} out of range for k={scene.k}")
    qgen = _as_model(qgen, QgenModel)
    guesser = _as_model(guesser, GuesserModel)
    q_state = qgen.new_state(scene)
    g_state = guesser.new_state(scene)
    transcript, traces = [], []
    for _ in range(max_rounds):
        tokens = qgen.generate_question(q_state, strategy=strategy, rng=rng,
                                        collect=collect)
        if world.is_stop_only(tokens):
            break
        answer = oracle(scene, target, tokens)
        q_state, trace = qgen.advance(q_state, tokens, answer, training, rng)
        g_state, _ = guesser.advance(g_state, tokens, answer, training, rng)
        transcript.append((tokens, answer))
        traces.append(trace)
    probs, predicted = guesser.guess(g_state, scene)
    return EpisodeResult(transcript, [float(p) for p in probs.values],
                         predicted, int(target), predicted == int(target),
                         traces)


def wilson_interval(successes, n, z=1.959963984540054):
    """95% score interval for a binomial proportion."""
    if n == 0:
        raise ValueError("interval undefined for n=0")
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    # the score interval always brackets the point estimate; the min/max
    # guards only absorb float rounding at p=0 or p=1
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def evaluate(qgen, guesser, records, strategy="greedy", max_rounds=8,
             seed=0, train_seeds=None):
    """Self-play success over a record set, with a 95% binomial interval.

    The scripted transcripts in `records` are ignored; only scene and
    target are used.  When `train_seeds` is given, every evaluation scene
    seed must be absent from it (guards the "new game" split).
    Returns (EvalSummary, [EpisodeResult, ...]).
    """
    records = list(records)
    if not records:
        raise ValueError("cannot evaluate on an empty split")
    qgen = _as_model(qgen, QgenModel)
    guesser = _as_model(guesser, GuesserModel)
    if train_seeds is not None:
        overlap = {r.scene.seed for r in records} & set(train_seeds)
        if overlap:
            raise ValueError(f"evaluation scenes overlap training seeds: "
                             f"{sorted(overlap)[:5]}")
    results = []
    for i, record in enumerate(records):
        rng = (np.random.default_rng([seed, i])
               if strategy == "sample" else None)
        results.append(play_episode(record.scene, record.target, qgen,
                                    guesser, strategy, max_rounds, rng))
    wins = sum(r.success for r in results)
    low, high = wilson_interval(wins, len(results))
    summary = EvalSummary(len(results), wins, wins / len(results), low, high)
    return summary, results


def write_results_jsonl(path, results):
    with open(path, "w") as fh:
        for res in results:
            fh.write(json.dumps(res.to_json()) + "\n")


def write_summary_csv(path, rows):
    """`rows`: [(label, EvalSummary), ...] -> one CSV line each."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "n_games", "n_success", "success_rate",
                         "ci_low", "ci_high"])
        for label, summary in rows:
            writer.writerow([label, summary.n_games, summary.n_success,
                             f"{summary.success_rate:.4f}",
                             f"{summary.ci_low:.4f}", f"{summary.ci_high:.4f}"])
