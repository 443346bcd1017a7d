"""Optimization loops: supervised likelihood training, policy-gradient
fine-tuning, and the run-to-run significance test.

All loops are deterministic given their config seed.  Gradients are
accumulated per batch on a fresh tape per example; optimizer steps are
serialized on the model's parameter store.
"""

import csv
import math
import warnings

import numpy as np
from scipy import stats

from . import autodiff as ad, engine, world


def _open_log(log_path):
    if log_path is None:
        return None, None
    fh = open(log_path, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(["epoch", "split", "loss", "success_rate"])
    return fh, writer


def _log(writer, epoch, split, loss, success=""):
    if writer is not None:
        writer.writerow([epoch, split, f"{loss:.6f}",
                         "" if success == "" else f"{success:.4f}"])


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _accumulate(model, batch, example_loss):
    """Mean gradient of `example_loss(record)` over a batch; returns
    (grads by name, mean loss value)."""
    grads = {name: np.zeros_like(arr) for name, arr in model.store.arrays.items()}
    total = 0.0
    for record in batch:
        with ad.Tape() as tape:
            loss = example_loss(record)
        tape.backward(loss)
        total += float(loss.values)
        for name, leaf in model.leaves.items():
            grads[name] += tape.grad(leaf)
    scale = 1.0 / len(batch)
    for g in grads.values():
        g *= scale
    return grads, total * scale


def _epoch_pass(model, records, cfg, opt, rng, example_loss):
    epoch_loss, n_batches = 0.0, 0
    for idx in _batches(len(records), cfg.batch_size, rng):
        grads, mean_loss = _accumulate(model, [records[i] for i in idx],
                                       example_loss)
        opt.step(model.store, grads)
        epoch_loss += mean_loss
        n_batches += 1
    return epoch_loss / n_batches


def sl_train_qgen(model, train_records, cfg, val_records=None, log_path=None):
    """Teacher-forced question modeling; returns per-epoch history rows.

    Loss is mean per-token negative log-likelihood (transcript questions
    plus one terminal stop).  Adam, with the learning rate decayed by
    `cfg.lr_decay` after each epoch.
    """
    train_records = list(train_records)
    if not train_records:
        raise ValueError("cannot train on an empty dataset")
    cfg.validate()
    opt = ad.Adam(cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    noise = np.random.default_rng([cfg.seed, 11])
    fh, writer = _open_log(log_path)
    history = []
    try:
        def example_loss(record):
            nll, count = model.dialogue_nll(record, training=True, rng=noise)
            return ad.div(nll, ad.constant(float(count)))

        for epoch in range(1, cfg.epochs + 1):
            train_loss = _epoch_pass(model, train_records, cfg, opt, rng,
                                     example_loss)
            row = {"epoch": epoch, "train_loss": train_loss}
            _log(writer, epoch, "train", train_loss)
            if val_records:
                val_loss = qgen_dataset_nll(model, val_records)
                row["val_loss"] = val_loss
                _log(writer, epoch, "val", val_loss)
            opt.lr *= cfg.lr_decay
            history.append(row)
    finally:
        if fh is not None:
            fh.close()
    return history


def qgen_dataset_nll(model, records):
    """Mean per-token NLL in evaluation mode (no attention noise)."""
    total_nll, total_tokens = 0.0, 0
    for record in records:
        nll, count = model.dialogue_nll(record, training=False)
        total_nll += float(nll.values)
        total_tokens += count
    return total_nll / total_tokens


def sl_train_guesser(model, train_records, cfg, val_records=None,
                     log_path=None):
    """Target classification over scripted transcripts; history rows include
    held-out error when `val_records` is given."""
    train_records = list(train_records)
    if not train_records:
        raise ValueError("cannot train on an empty dataset")
    cfg.validate()
    opt = ad.Adam(cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    noise = np.random.default_rng([cfg.seed, 12])
    fh, writer = _open_log(log_path)
    history = []
    try:
        def example_loss(record):
            return model.classification_loss(record, training=True, rng=noise)

        for epoch in range(1, cfg.epochs + 1):
            train_loss = _epoch_pass(model, train_records, cfg, opt, rng,
                                     example_loss)
            row = {"epoch": epoch, "train_loss": train_loss}
            _log(writer, epoch, "train", train_loss)
            if val_records:
                val_loss, val_error = guesser_dataset_error(model, val_records)
                row["val_loss"], row["val_error"] = val_loss, val_error
                _log(writer, epoch, "val", val_loss, 1.0 - val_error)
            opt.lr *= cfg.lr_decay
            history.append(row)
    finally:
        if fh is not None:
            fh.close()
    return history


def guesser_dataset_error(model, records):
    """(mean loss, error rate) on a record set in evaluation mode."""
    total_loss, wrong = 0.0, 0
    for record in records:
        total_loss += float(model.classification_loss(record).values)
        wrong += model.predict(record) != record.target
    return total_loss / len(records), wrong / len(records)


def reinforce_loss(logprobs, advantage):
    """Scalar policy-gradient surrogate −advantage·Σ log π(token).

    Minimizing it ascends expected reward; `logprobs` are the on-tape
    log-probability tensors of the sampled tokens.
    """
    total = logprobs[0]
    for term in logprobs[1:]:
        total = ad.add(total, term)
    return ad.mul(total, ad.constant(-float(advantage)))


# RL self-play scenes use a dedicated seed block far above the dataset
# generator's range so fine-tuning never sees evaluation scenes.
RL_SCENE_SEED_BASE = 10_000_000


def rl_train_qgen(qgen, guesser, cfg, log_path=None, scene_seeds=None):
    """REINFORCE fine-tuning of the questioner against a frozen guesser.

    Reward is 1 when the guesser picks the target after the dialogue, else
    0; a running-mean baseline centres it.  Questions are sampled, and the
    attention noise is on, exactly as in supervised training.  SGD with
    `cfg.lr`, batch of `cfg.rl_batch` episodes, global gradient-norm clip.
    Returns history rows with the running success rate.
    """
    if guesser is None:
        raise ValueError("policy-gradient fine-tuning needs a guesser")
    cfg.validate()
    opt = ad.Sgd(cfg.lr)
    baseline = 0.0
    fh, writer = _open_log(log_path)
    history = []
    if scene_seeds is None:
        scene_seeds = range(RL_SCENE_SEED_BASE + cfg.seed * cfg.rl_episodes,
                            RL_SCENE_SEED_BASE + (cfg.seed + 1) * cfg.rl_episodes)
    seeds = list(scene_seeds)[:cfg.rl_episodes]
    try:
        block_rewards, grads = [], None
        for i, scene_seed in enumerate(seeds):
            scene = world.generate_scene(scene_seed, cfg.model.k, cfg.model.d_v)
            ep_rng = np.random.default_rng([cfg.seed, 13, i])
            target = int(ep_rng.integers(scene.k))
            logprobs = []
            with ad.Tape() as tape:
                result = engine.play_episode(
                    scene, target, qgen, guesser, strategy="sample",
                    max_rounds=cfg.max_rounds, rng=ep_rng, training=True,
                    collect=logprobs.append)
                reward = float(result.success)
                advantage = reward - baseline
                if logprobs and advantage != 0.0:
                    loss = reinforce_loss(logprobs, advantage)
            if grads is None:
                grads = {name: np.zeros_like(arr)
                         for name, arr in qgen.store.arrays.items()}
            if logprobs and advantage != 0.0:
                tape.backward(loss)
                for name, leaf in qgen.leaves.items():
                    grads[name] += tape.grad(leaf)
            baseline = (cfg.baseline_decay * baseline
                        + (1.0 - cfg.baseline_decay) * reward)
            block_rewards.append(reward)
            if (i + 1) % cfg.rl_batch == 0 or i + 1 == len(seeds):
                for g in grads.values():
                    g /= max(1, len(block_rewards))
                ad.clip_gradients(grads, cfg.clip_norm)
                opt.step(qgen.store, grads)
                rate = float(np.mean(block_rewards))
                history.append({"episode": i + 1, "success_rate": rate,
                                "baseline": baseline})
                _log(writer, i + 1, "selfplay", 1.0 - rate, rate)
                block_rewards, grads = [], None
    finally:
        if fh is not None:
            fh.close()
    return history


def t_test(samples_a, samples_b):
    """Two-sample t-test; returns (statistic, p_value, degenerate_flag).

    The flag marks zero-variance inputs, where the test statistic is not
    well defined; equal constant samples report p=1, distinct ones p=0.
    """
    a = np.asarray(samples_a, dtype=np.float64)
    b = np.asarray(samples_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("need at least two runs per side")
    var_a, var_b = a.var(ddof=1), b.var(ddof=1)
    if var_a == 0.0 and var_b == 0.0:
        same = np.isclose(a.mean(), b.mean())
        return 0.0 if same else math.inf, 1.0 if same else 0.0, True
    degenerate = var_a == 0.0 or var_b == 0.0
    with warnings.catch_warnings():
        if degenerate:  # the flag already reports the precision problem
            warnings.simplefilter("ignore", RuntimeWarning)
        stat, p = stats.ttest_ind(a, b)
    return float(stat), float(p), degenerate


def significance_test(run_a, run_b, runs=10, seeds=None):
    """Run two configurations `runs` times and t-test their final metrics.

    `run_a(seed) -> float` must encapsulate train + eval for one seed.
    Returns a dict with both score lists and the test result.
    """
    if runs < 2:
        raise ValueError(f"need at least 2 runs, got {runs}")
    if seeds is None:
        seeds = list(range(runs))
    seeds = list(seeds)[:runs]
    scores_a = [float(run_a(s)) for s in seeds]
    scores_b = [float(run_b(s)) for s in seeds]
    stat, p, flagged = t_test(scores_a, scores_b)
    return {"scores_a": scores_a, "scores_b": scores_b,
            "statistic": stat, "p_value": p, "degenerate": flagged}
