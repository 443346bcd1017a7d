"""HTTP session API."""

import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from guessgame import engine, server, world
from guessgame.config import ModelConfig
from guessgame.model import GuesserModel, QgenModel

CFG = ModelConfig(d_word=8, d_h=12, d_v=6, k=4, max_len=8, category_emb=4)
T = 4


@pytest.fixture(scope="module")
def models():
    return QgenModel(CFG, seed=0), GuesserModel(CFG, seed=1)


@pytest.fixture()
def client(models):
    app = server.create_app(*models, max_rounds=T)
    return TestClient(app)


def drive_to_finish(client, seed=11, target=1):
    """Answer every question correctly via the rule-based oracle."""
    scene = world.generate_scene(seed, CFG.k, CFG.d_v)
    body = client.post("/session", json={"seed": seed, "target": target}).json()
    sid = body["session_id"]
    while body["status"] == "awaiting_answer":
        tokens = [world.VOCAB.id(n) for n in body["question"]["tokens"]]
        answer = world.oracle_answer(scene, target, tokens)
        body = client.post(f"/session/{sid}/answer",
                           json={"answer": answer.label}).json()
    return sid, body


class TestUnloaded:
    def test_session_routes_answer_503(self):
        client = TestClient(server.create_app())
        assert client.post("/session", json={}).status_code == 503
        assert client.get("/session/x").status_code == 503
        assert client.post("/session/x/answer",
                           json={"answer": "yes"}).status_code == 503


class TestCreate:
    def test_payload_shape(self, client):
        res = client.post("/session", json={"seed": 7, "target": 2})
        assert res.status_code == 200
        body = res.json()
        assert body["status"] == "awaiting_answer"
        assert body["turn"] == 0
        assert body["target"] == 2
        objs = body["scene"]["objects"]
        assert len(objs) == CFG.k
        for obj in objs:
            assert set(obj) == {"category", "color", "size", "bbox"}
            assert len(obj["bbox"]) == 4
        assert body["question"]["tokens"]
        assert body["question"]["text"] == " ".join(body["question"]["tokens"])

    def test_initial_trace_is_uniform(self, client):
        body = client.post("/session", json={"seed": 7, "target": 0}).json()
        trace = body["trace"]
        assert trace["turn"] == 0
        assert np.allclose(trace["att"], 1.0 / CFG.k)
        assert trace["alpha_q"] is None and trace["lambda"] is None

    def test_distinct_ids(self, client):
        a = client.post("/session", json={"seed": 7}).json()
        b = client.post("/session", json={"seed": 7}).json()
        assert a["session_id"] != b["session_id"]

    def test_unseeded_sessions_work(self, client):
        body = client.post("/session", json={}).json()
        assert body["status"] in ("awaiting_answer", "finished")
        assert 0 <= body["target"] < CFG.k

    def test_bad_target_rejected(self, client):
        res = client.post("/session", json={"seed": 7, "target": CFG.k})
        assert res.status_code == 400
        res = client.post("/session", json={"seed": 7, "target": -1})
        assert res.status_code == 400


class TestAnswerFlow:
    def test_turn_advances_with_trace(self, client):
        body = client.post("/session", json={"seed": 9, "target": 1}).json()
        sid = body["session_id"]
        res = client.post(f"/session/{sid}/answer", json={"answer": "no"})
        assert res.status_code == 200
        body = res.json()
        assert body["turn"] == 1
        trace = body["trace"]
        assert trace["turn"] == 1
        assert len(trace["att"]) == CFG.k
        assert np.isclose(sum(trace["att"]), 2.0)
        assert trace["lambda"] is not None

    def test_runs_to_guess(self, client):
        _, body = drive_to_finish(client)
        assert body["status"] == "finished"
        assert body["question"] is None
        assert np.isclose(sum(body["guess_distribution"]), 1.0)
        assert 0 <= body["predicted"] < CFG.k
        assert body["success"] == (body["predicted"] == body["target"])
        assert body["turn"] <= T

    def test_round_budget_enforced(self, client):
        body = client.post("/session", json={"seed": 13, "target": 3}).json()
        sid = body["session_id"]
        turns = 0
        while body["status"] == "awaiting_answer":
            body = client.post(f"/session/{sid}/answer",
                               json={"answer": "na"}).json()
            turns += 1
            assert turns <= T
        assert body["status"] == "finished"

    def test_unknown_session_404(self, client):
        res = client.post("/session/deadbeef/answer", json={"answer": "yes"})
        assert res.status_code == 404
        assert client.get("/session/deadbeef").status_code == 404

    def test_answer_after_finish_409(self, client):
        sid, _ = drive_to_finish(client)
        res = client.post(f"/session/{sid}/answer", json={"answer": "yes"})
        assert res.status_code == 409

    def test_bad_answer_literal_400(self, client):
        body = client.post("/session", json={"seed": 9, "target": 1}).json()
        sid = body["session_id"]
        for bad in ({"answer": "maybe"}, {"answer": 3}, {}):
            res = client.post(f"/session/{sid}/answer", json=bad)
            assert res.status_code == 400

    def test_yes_no_supports_disjoint(self, models):
        # complementary masks push the question attention onto disjoint
        # object sets
        app = server.create_app(*models, max_rounds=T)
        client = TestClient(app)
        traces = {}
        for label in ("yes", "no"):
            body = client.post("/session", json={"seed": 21, "target": 0}).json()
            sid = body["session_id"]
            traces[label] = client.post(f"/session/{sid}/answer",
                                        json={"answer": label}).json()["trace"]
        yes_support = np.asarray(traces["yes"]["att_q"]) > 1e-12
        no_support = np.asarray(traces["no"]["att_q"]) > 1e-12
        assert not (yes_support & no_support).any()


class TestSessionView:
    def test_get_reports_history(self, client):
        body = client.post("/session", json={"seed": 9, "target": 1}).json()
        sid = body["session_id"]
        client.post(f"/session/{sid}/answer", json={"answer": "yes"})
        view = client.get(f"/session/{sid}").json()
        assert view["turn"] == len(view["transcript"]) == len(view["traces"])
        assert view["transcript"][0]["answer"] == "yes"
        assert view["traces"][0]["turn"] == 1

    def test_idle_sessions_expire(self, models):
        app = server.create_app(*models, max_rounds=T, ttl=0.02)
        client = TestClient(app)
        body = client.post("/session", json={"seed": 9, "target": 1}).json()
        sid = body["session_id"]
        time.sleep(0.05)
        assert client.get(f"/session/{sid}").status_code == 404


class TestTraceEquivalence:
    def test_scripted_session_matches_play_episode(self, models):
        qgen, guesser = models
        for seed, target in ((31, 0), (32, 2), (33, 3)):
            app = server.create_app(qgen, guesser, max_rounds=T)
            client = TestClient(app)
            sid, final = drive_to_finish(client, seed=seed, target=target)
            view = client.get(f"/session/{sid}").json()
            scene = world.generate_scene(seed, CFG.k, CFG.d_v)
            episode = engine.play_episode(scene, target, qgen, guesser,
                                          max_rounds=T)
            assert view["traces"] == [tr.to_json() for tr in episode.traces]
            assert final["guess_distribution"] == list(
                episode.guess_distribution)
            assert final["predicted"] == episode.predicted
            api_transcript = [(q["question"]["tokens"], q["answer"])
                              for q in view["transcript"]]
            engine_transcript = [([world.VOCAB.name(t) for t in toks],
                                  ans.label)
                                 for toks, ans in episode.transcript]
            assert api_transcript == engine_transcript


class TestStaticConsole:
    def test_console_dir_mounted(self, models, tmp_path):
        (tmp_path / "index.html").write_text("<html>console</html>")
        app = server.create_app(*models, console_dir=str(tmp_path))
        client = TestClient(app)
        res = client.get("/console/")
        assert res.status_code == 200
        assert "console" in res.text
