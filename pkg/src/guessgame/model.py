"""Model assembly: the per-episode dialogue state and the turn update.

Both heads (question generator and guesser) run the same estimator core:
encode the question, fold it with the answer into the history, rebuild
the object attention (question-driven focusing plus history guidance),
hard-select the most-attended object, pool difference and overall visual
information, and blend them under the QA-pair condition.  The heads only
differ in what they do with the fused state F_t: the generator decodes
the next question from it, the guesser scores candidate objects with it.

Each model owns its parameters; nothing is shared across the two heads.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import attention, autodiff as ad, encoders, fusion, guesser, questioner
from .config import ModelConfig
from .world import VOCAB


@dataclass
class TurnTrace:
    """Everything the attention pipeline produced in one turn.

    Fields are plain lists/floats (JSON-ready).  Entries are None when the
    configured ablation skips the corresponding computation; with soft
    masking (no sharpening) `p` is None while `m` holds the soft mask.
    """
    turn: int
    alpha_q: list
    p: list
    m: list
    att_q: list
    att_h: list
    att: list
    lam: float
    selected: int

    def to_json(self):
        return {"turn": self.turn, "alpha_q": self.alpha_q, "P": self.p,
                "M": self.m, "att_q": self.att_q, "att_h": self.att_h,
                "att": self.att, "lambda": self.lam, "selected": self.selected}


@dataclass
class DialogueState:
    features: ad.Tensor   # (K, d_v), constant per episode
    att: ad.Tensor        # (K,) attention state (mass 2 once combined)
    history: ad.Tensor    # (d_h,)
    visual: ad.Tensor     # (d_v,)
    fused: ad.Tensor      # (d_h,)
    turn: int


class _EstimatorModel:
    """Parameter store plus the shared turn update; heads subclass this."""

    KIND = None

    def __init__(self, cfg=None, seed=0, store=None):
        self.cfg = (cfg or ModelConfig()).validate()
        if store is None:
            store = ad.ParamStore()
            rng = np.random.default_rng(seed)
            encoders.init_encoder_params(store, self.cfg, rng)
            attention.init_attention_params(store, self.cfg, rng)
            fusion.init_fusion_params(store, self.cfg, rng)
            questioner.init_fuse_params(store, self.cfg, rng)
            self._init_head(store, self.cfg, rng)
        self.store = store
        self.leaves = store.leaves()
        self.gru_w = store.gru_leaves(self.leaves, "gru_w")
        self.gru_c = store.gru_leaves(self.leaves, "gru_c")
        self.gru_p = store.gru_leaves(self.leaves, "gru_p")

    def _init_head(self, store, cfg, rng):
        raise NotImplementedError

    def save(self, path):
        ad.save_checkpoint(path, self.store,
                           meta={"kind": self.KIND, "config": asdict(self.cfg)})

    @classmethod
    def load(cls, path):
        store, meta = ad.load_checkpoint(path)
        if meta.get("kind") != cls.KIND:
            raise ValueError(f"checkpoint holds a {meta.get('kind')!r} model, "
                             f"expected {cls.KIND!r}")
        return cls(cfg=ModelConfig(**meta["config"]), store=store)

    def new_state(self, scene):
        """Turn-0 state: uniform attention, zero history, overall visual."""
        if scene.features.shape[1] != self.cfg.d_v:
            raise ValueError(f"scene features have d_v={scene.features.shape[1]}, "
                             f"model expects {self.cfg.d_v}")
        features = ad.constant(scene.features)
        att0 = attention.uniform_attention(scene.k)
        h0 = encoders.initial_history(self.cfg)
        v0 = fusion.attend(features, att0, self.cfg)
        f0 = questioner.fuse_multimodal(h0, v0, self.leaves)
        return DialogueState(features, att0, h0, v0, f0, 0)

    def advance(self, state, tokens, answer, training=False, rng=None):
        """Fold one answered question into the state; returns (state, trace)."""
        cfg = self.cfg
        q_enc = encoders.encode_question(tokens, self.leaves, self.gru_w, cfg)
        h_t = encoders.update_history(state.history, q_enc.summary, answer,
                                      self.leaves, self.gru_c)
        att_h = attention.history_attention(h_t, state.features, self.leaves)
        alpha_l = p_l = m_l = att_q_l = None
        if cfg.use_adfa:
            q_tilde = attention.question_glimpse(q_enc.per_word, self.leaves)
            alpha = attention.question_attention(q_tilde, state.features,
                                                 self.leaves, training, rng)
            if cfg.use_so:
                p = attention.sharpen(alpha.values, cfg.gamma)
                mask = attention.answer_mask(p, answer)
                p_l, m_l = p.tolist(), mask.tolist()
            else:
                mask = attention.soft_answer_mask(alpha, answer)
                m_l = mask.values.tolist()
            att_q = attention.update_focus(mask, state.att, self.leaves, cfg)
            att = attention.combine(att_q, att_h)
            alpha_l, att_q_l = alpha.values.tolist(), att_q.values.tolist()
        else:
            att = att_h
        selected = fusion.select_focus(att)
        lam_value = None
        if cfg.use_cvif:
            diff = fusion.difference_features(state.features, selected)
            d_att = fusion.attend(diff, att, cfg)
            i_att = fusion.attend(state.features, att, cfg)
            pair = encoders.encode_qa_pair(q_enc.summary, answer, self.leaves,
                                           self.gru_p, cfg)
            lam = fusion.condition_factor(pair, self.leaves)
            v_t = fusion.fuse(d_att, i_att, lam)
            lam_value = float(lam.values)
        else:
            v_t = fusion.attend(state.features, att, cfg)
        f_t = questioner.fuse_multimodal(h_t, v_t, self.leaves)
        trace = TurnTrace(state.turn + 1, alpha_l, p_l, m_l, att_q_l,
                          att_h.values.tolist(), att.values.tolist(),
                          lam_value, selected)
        next_state = DialogueState(state.features, att, h_t, v_t, f_t,
                                   state.turn + 1)
        return next_state, trace

    def run_dialogue(self, scene, dialogue, training=False, rng=None):
        """Advance through a recorded transcript; returns (state, traces)."""
        state = self.new_state(scene)
        traces = []
        for tokens, answer in dialogue:
            state, trace = self.advance(state, tokens, answer, training, rng)
            traces.append(trace)
        return state, traces


class QgenModel(_EstimatorModel):
    """Question-generation head on top of the estimator core."""

    KIND = "qgen"

    def __init__(self, cfg=None, seed=0, store=None):
        super().__init__(cfg, seed, store)
        self.gru_d = self.store.gru_leaves(self.leaves, "gru_d")

    def _init_head(self, store, cfg, rng):
        questioner.init_decoder_params(store, cfg, rng)

    def generate_question(self, state, strategy="greedy", rng=None,
                          beam_width=20, collect=None):
        return questioner.generate(state.fused, state.visual, self.leaves,
                                   self.gru_d, self.cfg.max_len, strategy,
                                   rng, beam_width, collect)

    def question_nll(self, state, tokens):
        return questioner.teacher_forced_nll(state.fused, state.visual, tokens,
                                             self.leaves, self.gru_d)

    def dialogue_nll(self, record, training=True, rng=None):
        """Teacher-forced loss over a transcript plus a terminal stop-only
        question (teaches the model when to stop asking).
        Returns (summed NLL tensor, token count)."""
        state = self.new_state(record.scene)
        total = None
        count = 0
        for tokens, answer in record.dialogue:
            nll = self.question_nll(state, tokens)
            total = nll if total is None else ad.add(total, nll)
            count += len(tokens)
            state, _ = self.advance(state, tokens, answer, training, rng)
        stop_nll = self.question_nll(state, [VOCAB.stop])
        total = stop_nll if total is None else ad.add(total, stop_nll)
        return total, count + 1


class GuesserModel(_EstimatorModel):
    """Target-classification head on top of the estimator core."""

    KIND = "guesser"

    def _init_head(self, store, cfg, rng):
        guesser.init_guesser_params(store, cfg, rng)

    def encode_objects(self, scene):
        return guesser.encode_scene_objects(scene, self.leaves)

    def guess(self, state, scene):
        """(probabilities over the K objects, predicted index)."""
        encodings = self.encode_objects(scene)
        return guesser.guess(state.fused, encodings, self.leaves, self.cfg)

    def classification_loss(self, record, training=False, rng=None):
        """Cross-entropy of the true target after replaying the transcript."""
        state, _ = self.run_dialogue(record.scene, record.dialogue,
                                     training, rng)
        logits = guesser.guess_logits(state.fused,
                                      self.encode_objects(record.scene),
                                      self.leaves, self.cfg)
        return ad.cross_entropy(logits, record.target)

    def predict(self, record):
        state, _ = self.run_dialogue(record.scene, record.dialogue)
        _, predicted = self.guess(state, record.scene)
        return predicted
