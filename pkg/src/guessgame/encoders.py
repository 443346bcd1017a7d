"""Language-side encoders: question words, dialogue history, QA pairs.

Three recurrent encoders share one word-embedding table and one 3-way
answer-embedding table:

* a word-level cell reads a question token by token (summary = last state),
* an upper-level cell folds [question summary; answer embedding] into the
  running history vector (zero-initialized),
* a pair cell encodes a single QA pair independently of history — first
  step consumes the question summary from a zero state, second step
  consumes that result with the answer embedding as the recurrent state.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .world import N_ANSWERS, VOCAB


def init_encoder_params(store, cfg, rng):
    store.add("emb.word", (len(VOCAB), cfg.d_word), rng, fan_in=cfg.d_word)
    store.add("emb.answer", (N_ANSWERS, cfg.d_h), rng, fan_in=cfg.d_h)
    store.add_gru("gru_w", cfg.d_word, cfg.d_h, rng)
    store.add_gru("gru_c", 2 * cfg.d_h, cfg.d_h, rng)
    store.add_gru("gru_p", cfg.d_h, cfg.d_h, rng)
    return store


@dataclass
class QuestionEncoding:
    per_word: ad.Tensor   # (m, d_h), row i = state after word i
    summary: ad.Tensor    # (d_h,), equals the last row of per_word


def encode_question(tokens, leaves, gru_w, cfg):
    if not tokens:
        raise ValueError("cannot encode an empty question")
    if len(tokens) > cfg.max_len:
        raise ValueError(f"question has {len(tokens)} tokens, cap is {cfg.max_len}")
    h = ad.constant(np.zeros(cfg.d_h))
    states = []
    for token in tokens:
        x = ad.embedding_lookup(leaves["emb.word"], int(token))
        h = ad.gru_cell(x, h, gru_w)
        states.append(h)
    return QuestionEncoding(ad.stack(states), states[-1])


def initial_history(cfg):
    return ad.constant(np.zeros(cfg.d_h))


def update_history(prev, q_summary, answer, leaves, gru_c):
    """One upper-layer step over the concatenated (question, answer) encoding."""
    a_vec = ad.embedding_lookup(leaves["emb.answer"], int(answer))
    return ad.gru_cell(ad.concat([q_summary, a_vec]), prev, gru_c)


def encode_qa_pair(q_summary, answer, leaves, gru_p, cfg):
    """History-independent QA-pair code: the pair cell runs the question
    summary from a zero state, then runs that result against the answer
    embedding as the recurrent state."""
    first = ad.gru_cell(q_summary, ad.constant(np.zeros(cfg.d_h)), gru_p)
    a_vec = ad.embedding_lookup(leaves["emb.answer"], int(answer))
    return ad.gru_cell(first, a_vec, gru_p)
