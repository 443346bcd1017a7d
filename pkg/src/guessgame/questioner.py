"""Question decoding on top of the fused dialogue/visual state.

The decoder cell starts from the fused state F_t and reads
[word embedding; visual state] at every step, so the current visual
estimate conditions each word.  The visual state is held fixed while one
question is produced.  Generation stops at the stop token or after
`max_len` tokens.
"""

import math

import numpy as np

from . import autodiff as ad
from .world import VOCAB


def init_fuse_params(store, cfg, rng):
    store.add("fuse.w_f", (cfg.d_h + cfg.d_v, cfg.d_h), rng)
    store.add("fuse.b_f", (cfg.d_h,))
    return store


def init_decoder_params(store, cfg, rng):
    store.add_gru("gru_d", cfg.d_word + cfg.d_v, cfg.d_h, rng)
    store.add("qgen.w_out", (cfg.d_h, len(VOCAB)), rng)
    store.add("qgen.b_out", (len(VOCAB),))
    return store


def fuse_multimodal(h_t, v_t, leaves):
    """F_t = tanh(W_f [history; visual] + b): the shared dialogue state both
    heads condition on."""
    x = ad.concat([h_t, v_t])
    return ad.tanh(ad.add(ad.matmul(x, leaves["fuse.w_f"]), leaves["fuse.b_f"]))


def decode_step(prev_token, v_t, hidden, leaves, gru_d):
    """One decoder step; returns (vocab logits, next hidden)."""
    w = ad.embedding_lookup(leaves["emb.word"], int(prev_token))
    h = ad.gru_cell(ad.concat([w, v_t]), hidden, gru_d)
    logits = ad.add(ad.matmul(h, leaves["qgen.w_out"]), leaves["qgen.b_out"])
    return logits, h


def teacher_forced_nll(f_t, v_t, tokens, leaves, gru_d):
    """Summed NLL of a token sequence decoded from state F_t."""
    hidden = f_t
    prev = VOCAB.bos
    total = None
    for token in tokens:
        logits, hidden = decode_step(prev, v_t, hidden, leaves, gru_d)
        nll = ad.cross_entropy(logits, int(token))
        total = nll if total is None else ad.add(total, nll)
        prev = int(token)
    return total


def _log_softmax(values):
    shifted = values - values.max()
    return shifted - math.log(np.exp(shifted).sum())


def beam_search(step_fn, init_state, stop_token, max_len, width,
                length_normalize=True):
    """Generic beam search over `step_fn(prev_token, state) -> (logp, state)`.

    `prev_token` is None on the first step.  Candidates are pruned each
    step by total log-probability; sequences retire on the stop token or
    at the length cap.  The winner is picked by log-probability per token
    (or by total when `length_normalize` is off).  Ties prefer the
    lexicographically smallest token sequence, which makes width 1
    reproduce greedy argmax decoding exactly.

    Returns (best token list, finished pool as [(tokens, total logp), ...]).
    """
    if width < 1:
        raise ValueError("beam width must be at least 1")
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    beams = [((), 0.0, init_state)]
    finished = []
    for _ in range(max_len):
        candidates = []
        for tokens, score, state in beams:
            prev = tokens[-1] if tokens else None
            logp, next_state = step_fn(prev, state)
            for token in range(len(logp)):
                candidates.append((tokens + (token,),
                                   score + float(logp[token]), next_state))
        candidates.sort(key=lambda c: (-c[1], c[0]))
        beams = []
        for tokens, score, state in candidates[:width]:
            if tokens[-1] == stop_token or len(tokens) >= max_len:
                finished.append((tokens, score))
            else:
                beams.append((tokens, score, state))
        if not beams:
            break
    if not finished:
        finished = [(tokens, score) for tokens, score, _ in beams]
    if length_normalize:
        finished.sort(key=lambda f: (-f[1] / len(f[0]), f[0]))
    else:
        finished.sort(key=lambda f: (-f[1], f[0]))
    return list(finished[0][0]), finished


def generate(f_t, v_t, leaves, gru_d, max_len, strategy="greedy",
             rng=None, beam_width=20, collect=None):
    """Produce one question (token ids; the stop token is kept when reached).

    strategy: "greedy" (argmax), "sample" (seeded categorical; pass
    `collect` to receive the log-prob tensor of each chosen token, which
    keeps sampling on the gradient tape), or "beam" (width-`beam_width`,
    length-normalized log-probability).
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    if strategy == "beam":
        def step(prev, hidden):
            logits, h = decode_step(VOCAB.bos if prev is None else prev,
                                    v_t, hidden, leaves, gru_d)
            return _log_softmax(logits.values), h
        tokens, _ = beam_search(step, f_t, VOCAB.stop, max_len, beam_width)
        return tokens
    if strategy not in ("greedy", "sample"):
        raise ValueError(f"unknown decoding strategy {strategy!r}")
    if strategy == "sample" and rng is None:
        raise ValueError("sampling requires an rng")
    hidden = f_t
    prev = VOCAB.bos
    tokens = []
    for _ in range(max_len):
        logits, hidden = decode_step(prev, v_t, hidden, leaves, gru_d)
        if strategy == "greedy":
            token = int(np.argmax(logits.values))
        else:
            probs = np.exp(_log_softmax(logits.values))
            probs /= probs.sum()
            token = int(rng.choice(len(probs), p=probs))
            if collect is not None:
                collect(ad.neg(ad.cross_entropy(logits, token)))
        tokens.append(token)
        if token == VOCAB.stop:
            break
        prev = token
    return tokens
