"""Session-based HTTP API for playing the game with a human oracle.

The server holds the questioner/guesser pair read-only and one dialogue
state per session.  The client sees the scene and the hidden target,
answers each generated question yes/no/na, and receives the next question
plus the attention trace of the turn just folded in; after the round
budget or a stop-only question the response carries the final guess.

Wire format (all JSON):
    POST /session                {"seed": int?, "target": int?}
    POST /session/{id}/answer    {"answer": "yes"|"no"|"na"}
    GET  /session/{id}
Errors: 503 models not loaded, 404 unknown/expired session, 409 answer on
a finished session, 400 malformed answer or target.
"""

import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles

from . import world
from .model import GuesserModel, QgenModel
from .world import VOCAB, Answer

SESSION_TTL_SECONDS = 30 * 60


@dataclass
class Session:
    id: str
    scene: world.Scene
    target: int
    q_state: object
    g_state: object
    pending: list            # tokens of the question awaiting an answer
    status: str = "awaiting_answer"
    transcript: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    guess: dict = None
    last_access: float = 0.0


def question_json(tokens):
    if tokens is None:
        return None
    names = [VOCAB.name(t) for t in tokens]
    return {"tokens": names, "text": " ".join(names)}


def scene_json(scene):
    return {"seed": scene.seed, "k": scene.k,
            "objects": [world.object_to_json(o) for o in scene.objects]}


def initial_trace(k):
    """The belief the first question is asked under: uniform attention over
    the K objects, before any answer arrives."""
    uniform = [1.0 / k] * k
    return {"turn": 0, "alpha_q": None, "P": None, "M": None,
            "att_q": None, "att_h": None, "att": uniform,
            "lambda": None, "selected": 0}


def create_app(qgen=None, guesser=None, max_rounds=8, ttl=SESSION_TTL_SECONDS,
               console_dir=None, rng_seed=None):
    """Build the FastAPI app; `qgen`/`guesser` are models or checkpoint paths.

    Passing neither model yields an app whose session routes answer 503
    (useful for deploy probes).  `rng_seed` pins scene/target draws for
    sessions created without an explicit seed.
    """
    if isinstance(qgen, (str,)) or hasattr(qgen, "__fspath__"):
        qgen = QgenModel.load(qgen)
    if isinstance(guesser, (str,)) or hasattr(guesser, "__fspath__"):
        guesser = GuesserModel.load(guesser)
    app = FastAPI(title="guessgame oracle API")
    sessions = {}
    lock = threading.Lock()
    fallback_rng = np.random.default_rng(rng_seed)

    def require_models():
        if qgen is None or guesser is None:
            raise HTTPException(503, "models are not loaded")

    def purge_expired(now=None):
        now = time.monotonic() if now is None else now
        for sid in [s for s, sess in sessions.items()
                    if now - sess.last_access > ttl]:
            del sessions[sid]

    def get_session(sid):
        purge_expired()
        sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(404, f"unknown or expired session {sid!r}")
        sess.last_access = time.monotonic()
        return sess

    def finish(sess):
        probs, predicted = guesser.guess(sess.g_state, sess.scene)
        sess.status = "finished"
        sess.pending = None
        sess.guess = {"guess_distribution": [float(p) for p in probs.values],
                      "predicted": predicted,
                      "success": predicted == sess.target}

    def next_question(sess):
        tokens = qgen.generate_question(sess.q_state)
        if world.is_stop_only(tokens) or len(sess.transcript) >= max_rounds:
            finish(sess)
        else:
            sess.pending = tokens

    def session_view(sess, trace=None):
        view = {"session_id": sess.id, "status": sess.status,
                "turn": len(sess.transcript), "target": sess.target,
                "scene": scene_json(sess.scene),
                "question": question_json(sess.pending)}
        if trace is not None:
            view["trace"] = trace
        if sess.guess is not None:
            view.update(sess.guess)
        return view

    @app.post("/session")
    def create_session(body: dict = None):
        require_models()
        body = body or {}
        with lock:
            purge_expired()
            seed = body.get("seed")
            if seed is None:
                seed = int(fallback_rng.integers(1, 2**31))
            try:
                scene = world.generate_scene(int(seed), qgen.cfg.k,
                                             qgen.cfg.d_v)
            except (TypeError, ValueError) as err:
                raise HTTPException(400, f"bad seed: {err}")
            target = body.get("target")
            if target is None:
                target = int(fallback_rng.integers(scene.k))
            if not isinstance(target, int) or not 0 <= target < scene.k:
                raise HTTPException(400, f"target must be an index in "
                                    f"[0, {scene.k}), got {target!r}")
            sess = Session(uuid.uuid4().hex, scene, target,
                           qgen.new_state(scene), guesser.new_state(scene),
                           pending=None, last_access=time.monotonic())
            sess.pending = qgen.generate_question(sess.q_state)
            if world.is_stop_only(sess.pending):
                finish(sess)
            sessions[sess.id] = sess
            return session_view(sess, trace=initial_trace(scene.k))

    @app.post("/session/{sid}/answer")
    def submit_answer(sid: str, body: dict):
        require_models()
        with lock:
            sess = get_session(sid)
            if sess.status != "awaiting_answer":
                raise HTTPException(409, "session is finished")
            label = (body or {}).get("answer")
            try:
                answer = Answer.from_label(label)
            except (KeyError, AttributeError):
                raise HTTPException(400, f"answer must be one of yes/no/na, "
                                    f"got {label!r}")
            tokens = sess.pending
            sess.q_state, trace = qgen.advance(sess.q_state, tokens, answer)
            sess.g_state, _ = guesser.advance(sess.g_state, tokens, answer)
            sess.transcript.append({"question": question_json(tokens),
                                    "answer": answer.label})
            sess.traces.append(trace.to_json())
            next_question(sess)
            return session_view(sess, trace=sess.traces[-1])

    @app.get("/session/{sid}")
    def get_session_state(sid: str):
        require_models()
        with lock:
            sess = get_session(sid)
            view = session_view(sess)
            view["transcript"] = sess.transcript
            view["traces"] = sess.traces
            return view

    if console_dir is not None:
        app.mount("/console", StaticFiles(directory=console_dir, html=True),
                  name="console")
    return app
