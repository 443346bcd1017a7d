"""Episode orchestration and evaluation."""

import json

import numpy as np
import pytest

from guessgame import engine, world
from guessgame.model import GuesserModel, QgenModel
from guessgame.world import VOCAB, featurize, generate_scene, make_record


@pytest.fixture(scope="module")
def models(small_cfg_module):
    return (QgenModel(small_cfg_module, seed=0),
            GuesserModel(small_cfg_module, seed=1))


@pytest.fixture(scope="module")
def small_cfg_module():
    from guessgame.config import ModelConfig
    return ModelConfig(d_word=8, d_h=12, d_v=6, k=4, max_len=8,
                       category_emb=4)


class TestPlayEpisode:
    def test_structure(self, models, small_cfg_module):
        qgen, guesser = models
        scene = generate_scene(21, k=4, d_v=small_cfg_module.d_v)
        res = engine.play_episode(scene, 2, qgen, guesser, max_rounds=5)
        assert len(res.transcript) <= 5
        assert len(res.traces) == len(res.transcript)
        assert len(res.guess_distribution) == scene.k
        assert np.isclose(sum(res.guess_distribution), 1.0)
        assert res.target == 2
        assert res.success == (res.predicted == res.target)
        for tokens, answer in res.transcript:
            assert isinstance(answer, world.Answer)
            assert len(tokens) <= small_cfg_module.max_len

    def test_greedy_is_deterministic(self, models, small_cfg_module):
        qgen, guesser = models
        scene = generate_scene(22, k=4, d_v=small_cfg_module.d_v)
        a = engine.play_episode(scene, 1, qgen, guesser)
        b = engine.play_episode(scene, 1, qgen, guesser)
        assert a.to_json() == b.to_json()

    def test_stop_only_question_ends_game(self, small_cfg_module):
        qgen = QgenModel(small_cfg_module, seed=0)
        guesser = GuesserModel(small_cfg_module, seed=1)
        # force an immediate stop: bias the output layer hard toward <stop>
        qgen.store.arrays["qgen.b_out"][VOCAB.stop] = 50.0
        scene = generate_scene(23, k=4, d_v=small_cfg_module.d_v)
        res = engine.play_episode(scene, 0, qgen, guesser, max_rounds=6)
        assert res.transcript == [] and res.traces == []
        assert np.isclose(sum(res.guess_distribution), 1.0)

    def test_single_candidate_always_succeeds(self, models, small_cfg_module):
        qgen, guesser = models
        big = generate_scene(24, k=3, d_v=small_cfg_module.d_v)
        scene = world.Scene([big.objects[0]],
                           featurize([big.objects[0]], 24,
                                     small_cfg_module.d_v), 24)
        res = engine.play_episode(scene, 0, qgen, guesser, max_rounds=4)
        assert res.success

    def test_bad_inputs(self, models, small_cfg_module):
        qgen, guesser = models
        scene = generate_scene(25, k=4, d_v=small_cfg_module.d_v)
        with pytest.raises(IndexError):
            engine.play_episode(scene, 4, qgen, guesser)
        with pytest.raises(ValueError):
            engine.play_episode(scene, 0, qgen, guesser, max_rounds=0)

    def test_checkpoint_paths_accepted(self, models, small_cfg_module,
                                       tmp_path):
        qgen, guesser = models
        qp, gp = tmp_path / "q.json", tmp_path / "g.json"
        qgen.save(qp)
        guesser.save(gp)
        scene = generate_scene(26, k=4, d_v=small_cfg_module.d_v)
        direct = engine.play_episode(scene, 3, qgen, guesser)
        via_path = engine.play_episode(scene, 3, str(qp), str(gp))
        assert direct.to_json() == via_path.to_json()

    def test_sampled_episodes_are_seeded(self, models, small_cfg_module):
        qgen, guesser = models
        scene = generate_scene(27, k=4, d_v=small_cfg_module.d_v)
        a = engine.play_episode(scene, 1, qgen, guesser, strategy="sample",
                                rng=np.random.default_rng(3), training=True)
        b = engine.play_episode(scene, 1, qgen, guesser, strategy="sample",
                                rng=np.random.default_rng(3), training=True)
        assert a.to_json() == b.to_json()


class TestWilsonInterval:
    def test_reference_values(self):
        low, high = engine.wilson_interval(5, 10)
        assert np.isclose(low, 0.2366, atol=5e-4)
        assert np.isclose(high, 0.7634, atol=5e-4)
        low, high = engine.wilson_interval(0, 10)
        assert low == 0.0
        assert np.isclose(high, 0.2775, atol=5e-4)

    def test_bounds_and_monotonicity(self):
        for n in (5, 20, 100):
            for s in range(n + 1):
                low, high = engine.wilson_interval(s, n)
                assert 0.0 <= low <= s / n <= high <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            engine.wilson_interval(0, 0)


class TestEvaluate:
    def _records(self, cfg, seeds):
        return [make_record(s, k=cfg.k, d_v=cfg.d_v) for s in seeds]

    def test_summary_consistent(self, models, small_cfg_module):
        qgen, guesser = models
        records = self._records(small_cfg_module, range(30, 36))
        summary, results = engine.evaluate(qgen, guesser, records,
                                           max_rounds=4)
        assert summary.n_games == 6
        assert summary.n_success == sum(r.success for r in results)
        assert np.isclose(summary.success_rate, summary.n_success / 6)
        assert summary.ci_low <= summary.success_rate <= summary.ci_high

    def test_empty_split_rejected(self, models):
        with pytest.raises(ValueError):
            engine.evaluate(*models, [])

    def test_split_hygiene(self, models, small_cfg_module):
        qgen, guesser = models
        records = self._records(small_cfg_module, range(40, 44))
        engine.evaluate(qgen, guesser, records, max_rounds=3,
                        train_seeds={1, 2, 3})
        with pytest.raises(ValueError):
            engine.evaluate(qgen, guesser, records, max_rounds=3,
                            train_seeds={41, 99})

    def test_result_files(self, models, small_cfg_module, tmp_path):
        qgen, guesser = models
        records = self._records(small_cfg_module, range(50, 53))
        summary, results = engine.evaluate(qgen, guesser, records,
                                           max_rounds=3)
        jl = tmp_path / "episodes.jsonl"
        engine.write_results_jsonl(jl, results)
        lines = [json.loads(line) for line in jl.read_text().splitlines()]
        assert len(lines) == 3
        assert set(lines[0]) == {"transcript", "guess_distribution",
                                 "predicted", "target", "success", "traces"}
        cs = tmp_path / "summary.csv"
        engine.write_summary_csv(cs, [("new_game", summary)])
        text = cs.read_text().splitlines()
        assert text[0] == "split,n_games,n_success,success_rate,ci_low,ci_high"
        assert text[1].startswith("new_game,3,")
