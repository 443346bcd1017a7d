"""Conditional fusion of difference and overall visual information.

The most-attended object is hard-selected (argmax, lowest index on ties,
no gradient).  Two pooled feature vectors are built under the current
attention state — rows of (selected minus others) and the raw object
features — and blended by a factor computed from the QA-pair encoding, so
the answer decides how much contrast-with-the-focus matters versus the
overall picture.
"""

import numpy as np

from . import autodiff as ad


def init_fusion_params(store, cfg, rng):
    store.add("cvif.w_p", (cfg.d_h, 2), rng)
    return store


def select_focus(att):
    """Index of the largest attention weight; first index wins ties."""
    values = att.values if isinstance(att, ad.Tensor) else np.asarray(att)
    if values.size == 0:
        raise ValueError("cannot select a focus over zero objects")
    return int(np.argmax(values))


def difference_features(features, selected):
    """Row j = features[selected] - features[j] (the selected row is zero)."""
    return ad.difference_rows(features, selected)


def attend(features, att, cfg):
    """Attention-weighted sum of feature rows.

    By default the raw attention state (mass 2 after combination) weights
    the rows; `renormalize_att` rescales it to a distribution first.
    """
    if cfg.renormalize_att:
        att = ad.div(att, ad.total(att))
    return ad.weighted_sum(att, features)


def condition_factor(p_t, leaves):
    """Blend factor in (0,1): first coordinate of a 2-way softmax over a
    linear readout of the QA-pair encoding."""
    return ad.pick(ad.softmax(ad.matmul(p_t, leaves["cvif.w_p"])), 0)


def fuse(d_att, i_att, lam):
    """Elementwise convex combination lam*d_att + (1-lam)*i_att."""
    rest = ad.sub(ad.constant(1.0), lam)
    return ad.add(ad.mul(d_att, lam), ad.mul(i_att, rest))
