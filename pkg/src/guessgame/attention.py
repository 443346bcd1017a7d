"""Answer-driven focusing attention over scene objects.

Per turn the object attention is rebuilt from two distributions:

* a question-side distribution: a 2-glimpse summary of the question is
  fused with each object feature by Hadamard product, scored, and
  softmaxed (with Gumbel noise on the logits during training); the result
  is sharpened to a binary relevance vector P, flipped or neutralized by
  the answer (YES keeps P, NO takes 1-P, NA keeps everything), and the
  surviving slots of the previous attention are renormalized under a
  learnable temperature;
* a history-side distribution computed the same way from the running
  dialogue state, always full-support.

Their elementwise sum (total mass 2) is the turn's attention state.  The
binary P and mask are constants of the turn: no gradient is routed
through the sharpening step.  The soft-mask variants back the ablation
that skips sharpening and adjusts the raw question attention directly.
"""

import numpy as np

from . import autodiff as ad
from .world import Answer


def init_attention_params(store, cfg, rng):
    store.add("adfa.glimpse_1", (cfg.d_h,), rng, fan_in=cfg.d_h)
    store.add("adfa.glimpse_2", (cfg.d_h,), rng, fan_in=cfg.d_h)
    store.add("adfa.w_q", (2 * cfg.d_h, cfg.d_h), rng)
    store.add("adfa.w_iq", (cfg.d_v, cfg.d_h), rng)
    store.add("adfa.w_fq", (cfg.d_h,), rng, fan_in=cfg.d_h)
    store.add("adfa.w_h", (cfg.d_h, cfg.d_h), rng)
    store.add("adfa.w_ih", (cfg.d_v, cfg.d_h), rng)
    store.add("adfa.w_fh", (cfg.d_h,), rng, fan_in=cfg.d_h)
    store.add("adfa.rho", ())   # log-temperature, so tau = exp(rho) starts at 1
    return store


def uniform_attention(k):
    return ad.constant(np.full(k, 1.0 / k))


def question_glimpse(per_word, leaves):
    """Concatenation of two word-attention summaries of the question."""
    glimpses = []
    for name in ("adfa.glimpse_1", "adfa.glimpse_2"):
        weights = ad.softmax(ad.matmul(per_word, leaves[name]))
        glimpses.append(ad.weighted_sum(weights, per_word))
    return ad.concat(glimpses)


def _fused_scores(query, features, w_query, w_feat, w_score):
    projected = ad.mul(ad.matmul(features, w_feat), ad.matmul(query, w_query))
    return ad.matmul(projected, w_score)


def question_attention(q_tilde, features, leaves, training=False, rng=None):
    """Question-guided distribution over objects; noisy logits in training."""
    logits = _fused_scores(q_tilde, features,
                           leaves["adfa.w_q"], leaves["adfa.w_iq"],
                           leaves["adfa.w_fq"])
    if training:
        logits = ad.gumbel_perturb(logits, rng)
    return ad.softmax(logits)


def history_attention(h_t, features, leaves):
    """History-guided distribution over objects (never sharpened or masked)."""
    return ad.softmax(_fused_scores(h_t, features,
                                    leaves["adfa.w_h"], leaves["adfa.w_ih"],
                                    leaves["adfa.w_fh"]))


def sharpen(alpha, gamma, eps=1e-12):
    """Binary relevance by thresholding the max-min normalized attention.

    A constant vector carries no evidence, so the degenerate max == min
    case maps to all ones (a neutral mask).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    span = alpha.max() - alpha.min()
    if span < eps:
        return np.ones_like(alpha)
    norm = (alpha - alpha.min()) / span
    return (norm > gamma).astype(np.float64)


def answer_mask(p, answer):
    """YES holds the sharpened focus, NO inverts it, NA keeps everything.

    An all-zero result (only reachable when a degenerate all-ones P meets a
    NO answer) falls back to the neutral all-ones mask.
    """
    p = np.asarray(p, dtype=np.float64)
    if answer == Answer.YES:
        m = p.copy()
    elif answer == Answer.NO:
        m = 1.0 - p
    else:
        m = np.ones_like(p)
    if not m.any():
        return np.ones_like(p)
    return m


def soft_answer_mask(alpha, answer):
    """Continuous counterpart of answer_mask for the no-sharpening ablation:
    the raw question attention itself plays the role of P."""
    if answer == Answer.YES:
        return alpha
    if answer == Answer.NO:
        return ad.sub(ad.constant(np.ones(alpha.shape)), alpha)
    return ad.constant(np.ones(alpha.shape))


def update_focus(mask, att_prev, leaves, cfg):
    """Apply the answer mask to the previous attention state and renormalize
    the survivors under the learnable temperature.

    `mask` is either a binary numpy vector (sharpened path; its zeros define
    the masked-softmax support) or a tensor of soft weights (full support).
    """
    if isinstance(mask, ad.Tensor):
        support = np.ones(mask.shape)
        mask_t = mask
    else:
        support = np.asarray(mask, dtype=np.float64)
        mask_t = ad.constant(support)
    z = ad.mul(mask_t, att_prev)
    normed = ad.normalize_vec(z, cfg.focus_norm)
    tau = ad.exp(leaves["adfa.rho"])
    return ad.masked_softmax(ad.div(normed, tau), support)


def combine(att_q, att_h):
    """Turn attention state: raw sum of the two distributions (mass 2)."""
    return ad.add(att_q, att_h)
