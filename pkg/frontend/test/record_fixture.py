"""Record the contract-test fixture by playing one scripted session.

Runs the real FastAPI app in-process (no sockets) and saves every payload
the console would see: the creation view, the reply to each answer, and
the final GET.  Answers follow the rule oracle, so the session is exactly
the scripted flow the server-parity tests replay.

By default the models are freshly initialized at a small width — the
contract facts (ranking, gating, bar arithmetic) do not depend on
training — but --qgen/--guesser accept real checkpoints for a lifelike
fixture.
"""

import argparse
import json
import os

from fastapi.testclient import TestClient

from guessgame import server, world
from guessgame.config import ModelConfig
from guessgame.model import GuesserModel, QgenModel
from guessgame.world import VOCAB

SCENE_SEED = 31_013
TARGET = 2


def build_models(args):
    if args.qgen and args.guesser:
        return QgenModel.load(args.qgen), GuesserModel.load(args.guesser)
    cfg = ModelConfig(d_word=16, d_h=24, d_v=16, k=6, max_len=6,
                      category_emb=8)
    return QgenModel(cfg, seed=11), GuesserModel(cfg, seed=12)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--qgen", help="questioner checkpoint (JSON)")
    ap.add_argument("--guesser", help="guesser checkpoint (JSON)")
    ap.add_argument("--out", default=os.path.join(
        os.path.dirname(__file__), "fixtures", "session.json"))
    args = ap.parse_args()

    qgen, guesser = build_models(args)
    client = TestClient(server.create_app(qgen, guesser, max_rounds=8))
    scene = world.generate_scene(SCENE_SEED, qgen.cfg.k, qgen.cfg.d_v)

    creation = client.post(
        "/session", json={"seed": SCENE_SEED, "target": TARGET}).json()
    sid = creation["session_id"]

    steps = []
    body = creation
    while body["status"] == "awaiting_answer":
        tokens = [VOCAB.id(n) for n in body["question"]["tokens"]]
        answer = world.oracle_answer(scene, TARGET, tokens)
        body = client.post(f"/session/{sid}/answer",
                           json={"answer": answer.label}).json()
        steps.append({"answer": answer.label, "view": body})

    final_get = client.get(f"/session/{sid}").json()
    assert len(steps) >= 2, f"degenerate session ({len(steps)} turns); " \
                            "pick a different SCENE_SEED"
    assert final_get["status"] == "finished"

    os.makedirs(os.path.dirname(args.out), exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump({"creation": creation, "steps": steps,
                   "final_get": final_get}, fh, indent=1)
    print(f"wrote {args.out}: {len(steps)} answered turns, "
          f"predicted {final_get['predicted']} (target {TARGET})")


if __name__ == "__main__":
    main()
