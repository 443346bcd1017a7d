"""Object classification head: who was the target?

Every candidate object is encoded from its spatial descriptor and a
learned category embedding through a two-layer rectified MLP; the guess
is a softmax over dot products between those encodings and a projection
of the final fused dialogue state.
"""

import numpy as np

from . import autodiff as ad
from .world import CATEGORIES, spatial_vector


def init_guesser_params(store, cfg, rng):
    store.add("guess.emb_cat", (len(CATEGORIES), cfg.category_emb), rng,
              fan_in=cfg.category_emb)
    store.add("guess.w_o1", (8 + cfg.category_emb, cfg.d_h), rng)
    store.add("guess.b_o1", (cfg.d_h,))
    store.add("guess.w_o2", (cfg.d_h, cfg.d_h), rng)
    store.add("guess.b_o2", (cfg.d_h,))
    store.add("guess.w_prime", (cfg.d_h, cfg.d_h), rng)
    return store


def encode_object(spatial, category, leaves):
    """r_o = ReLU(W2 ReLU(W1 [spatial; category embedding]))."""
    if not 0 <= category < len(CATEGORIES):
        raise IndexError(f"category {category} out of range")
    c = ad.embedding_lookup(leaves["guess.emb_cat"], category)
    x = ad.concat([ad.constant(np.asarray(spatial, dtype=np.float64)), c])
    h = ad.relu(ad.add(ad.matmul(x, leaves["guess.w_o1"]), leaves["guess.b_o1"]))
    return ad.relu(ad.add(ad.matmul(h, leaves["guess.w_o2"]), leaves["guess.b_o2"]))


def encode_scene_objects(scene, leaves):
    """(K, d_h) matrix of candidate encodings, one row per scene object."""
    return ad.stack([encode_object(spatial_vector(o), o.category, leaves)
                     for o in scene.objects])


def guess_logits(f_t, encodings, leaves, cfg):
    if cfg.project_fused:
        f_t = ad.matmul(f_t, leaves["guess.w_prime"])
    return ad.matmul(encodings, f_t)


def guess(f_t, encodings, leaves, cfg):
    """(probability tensor over candidates, predicted index)."""
    if encodings.shape[0] == 0:
        raise ValueError("no candidate objects to guess among")
    probs = ad.softmax(guess_logits(f_t, encodings, leaves, cfg))
    return probs, int(np.argmax(probs.values))
