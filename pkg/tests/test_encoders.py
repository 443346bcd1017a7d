"""Question, history, and QA-pair encoders."""

import numpy as np
import pytest

from guessgame import autodiff as ad, encoders
from guessgame.world import VOCAB, Answer
from gradcheck import check_gradients


def build(cfg, rng=None):
    store = encoders.init_encoder_params(ad.ParamStore(), cfg, rng)
    leaves = store.leaves()
    return store, leaves


class TestEncodeQuestion:
    def test_single_token_row_equals_summary(self, small_cfg, rng):
        _, leaves = build(small_cfg, rng)
        enc = encoders.encode_question([VOCAB.stop], leaves,
                                       _gru(leaves), small_cfg)
        assert enc.per_word.shape == (1, small_cfg.d_h)
        assert np.array_equal(enc.per_word.values[0], enc.summary.values)

    def test_permutation_changes_summary(self, small_cfg, rng):
        _, leaves = build(small_cfg, rng)
        q = VOCAB.encode("is-category dog <stop>")
        a = encoders.encode_question(q, leaves, _gru(leaves), small_cfg)
        b = encoders.encode_question(list(reversed(q)), leaves,
                                     _gru(leaves), small_cfg)
        assert not np.allclose(a.summary.values, b.summary.values)

    def test_zero_params_zero_summary(self, small_cfg):
        _, leaves = build(small_cfg, rng=None)
        enc = encoders.encode_question(VOCAB.encode("is-color red <stop>"),
                                       leaves, _gru(leaves), small_cfg)
        assert np.allclose(enc.summary.values, 0.0)

    def test_empty_question_rejected(self, small_cfg, rng):
        _, leaves = build(small_cfg, rng)
        with pytest.raises(ValueError):
            encoders.encode_question([], leaves, _gru(leaves), small_cfg)

    def test_over_length_rejected(self, small_cfg, rng):
        _, leaves = build(small_cfg, rng)
        with pytest.raises(ValueError):
            encoders.encode_question([VOCAB.stop] * (small_cfg.max_len + 1),
                                     leaves, _gru(leaves), small_cfg)


def _gru(leaves, prefix="gru_w"):
    return ad.GruParams(*(leaves[f"{prefix}.{k}_{g}"]
                          for g in ("r", "z", "n") for k in ("w", "u", "b")))


class TestHistory:
    def test_initial_history_is_zero(self, small_cfg):
        assert np.allclose(encoders.initial_history(small_cfg).values, 0.0)

    def test_prev_state_matters(self, small_cfg, rng):
        _, leaves = build(small_cfg, rng)
        q = encoders.encode_question(VOCAB.encode("is-size small <stop>"),
                                     leaves, _gru(leaves), small_cfg)
        h_a = encoders.update_history(encoders.initial_history(small_cfg),
                                      q.summary, Answer.YES, leaves,
                                      _gru(leaves, "gru_c"))
        other = ad.constant(np.linspace(-0.5, 0.5, small_cfg.d_h))
        h_b = encoders.update_history(other, q.summary, Answer.YES, leaves,
                                      _gru(leaves, "gru_c"))
        assert not np.allclose(h_a.values, h_b.values)

    def test_history_bounded(self, small_cfg, rng):
        _, leaves = build(small_cfg, rng)
        h = encoders.initial_history(small_cfg)
        for seed in range(20):
            q = encoders.encode_question(
                VOCAB.encode("in-half left <stop>"), leaves,
                _gru(leaves), small_cfg)
            h = encoders.update_history(h, q.summary, Answer(seed % 3),
                                        leaves, _gru(leaves, "gru_c"))
            assert np.abs(h.values).max() < 1.0


class TestQaPair:
    def test_history_independence(self, small_cfg, rng):
        _, leaves = build(small_cfg, rng)
        q = encoders.encode_question(VOCAB.encode("is-category cup <stop>"),
                                     leaves, _gru(leaves), small_cfg)
        p1 = encoders.encode_qa_pair(q.summary, Answer.YES, leaves,
                                     _gru(leaves, "gru_p"), small_cfg)
        p2 = encoders.encode_qa_pair(q.summary, Answer.YES, leaves,
                                     _gru(leaves, "gru_p"), small_cfg)
        assert np.array_equal(p1.values, p2.values)

    def test_answer_flip_changes_code(self, small_cfg, rng):
        _, leaves = build(small_cfg, rng)
        q = encoders.encode_question(VOCAB.encode("is-category cup <stop>"),
                                     leaves, _gru(leaves), small_cfg)
        p_yes = encoders.encode_qa_pair(q.summary, Answer.YES, leaves,
                                        _gru(leaves, "gru_p"), small_cfg)
        p_no = encoders.encode_qa_pair(q.summary, Answer.NO, leaves,
                                       _gru(leaves, "gru_p"), small_cfg)
        assert not np.allclose(p_yes.values, p_no.values)

    def test_zero_params_zero_code(self, small_cfg):
        _, leaves = build(small_cfg, rng=None)
        q = encoders.encode_question([VOCAB.stop], leaves,
                                     _gru(leaves), small_cfg)
        p = encoders.encode_qa_pair(q.summary, Answer.NA, leaves,
                                    _gru(leaves, "gru_p"), small_cfg)
        assert np.allclose(p.values, 0.0)


class TestEncoderGradients:
    def test_end_to_end_finite_differences(self, tiny_cfg):
        rng = np.random.default_rng(3)
        store = encoders.init_encoder_params(ad.ParamStore(), tiny_cfg, rng)
        names = sorted(store.arrays)
        arrays = [store.arrays[n] for n in names]
        tokens = VOCAB.encode("is-category dog <stop>")
        probe = np.linspace(0.1, 1.0, tiny_cfg.d_h)

        def build_loss(tensors):
            leaves = dict(zip(names, tensors))
            q = encoders.encode_question(tokens, leaves, _gru(leaves), tiny_cfg)
            h = encoders.update_history(encoders.initial_history(tiny_cfg),
                                        q.summary, Answer.NO, leaves,
                                        _gru(leaves, "gru_c"))
            p = encoders.encode_qa_pair(q.summary, Answer.NO, leaves,
                                        _gru(leaves, "gru_p"), tiny_cfg)
            return ad.add(ad.matmul(h, ad.constant(probe)),
                          ad.matmul(p, ad.constant(probe)))

        check_gradients(build_loss, arrays)
