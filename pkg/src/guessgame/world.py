"""Synthetic guessing-game worlds: scenes, questions, and a rule-based oracle.

A scene is a set of K abstract objects, each with a category, a color, a
size, and an axis-aligned bounding box in [0, 1]^2 image coordinates.
Questions come from a small templated mini-language instead of natural
language, which keeps the whole pipeline learnable in minutes:

    is-category <category> <stop>      e.g.  "is-category dog <stop>"
    is-color    <color>    <stop>
    is-size     <size>     <stop>
    in-half     <half>     <stop>      halves: left right top bottom
    in-quadrant <quadrant> <stop>      quadrants: top-left .. bottom-right
    order <axis> <rank-k>  <stop>      "is it the k-th object along <axis>?"

Any token sequence that is not exactly one of the templates above is
malformed, and the oracle answers NA; well-formed questions get YES or NO
by evaluating the predicate against the secret target object.  Halves and
quadrants test the box center against the image midlines; y grows
downward, so "top" means center_y < 0.5, and centers exactly on a midline
count as right / bottom.  Order ranks are 1-based, sorted by box center
along the axis with ties broken by object index.
"""

import json
import os
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

# ---------------------------------------------------------------------------
# attribute vocabularies

CATEGORIES = ("dog", "cat", "car", "bus", "chair", "table",
              "ball", "book", "cup", "lamp", "tree", "bird")
COLORS = ("red", "blue", "green", "yellow", "black", "white")
SIZES = ("small", "medium", "large")
HALVES = ("left", "right", "top", "bottom")
QUADRANTS = ("top-left", "top-right", "bottom-left", "bottom-right")
AXES = ("x", "y")
MAX_RANK = 8
RANKS = tuple(f"rank-{i}" for i in range(1, MAX_RANK + 1))

PAD, BOS, STOP = "<pad>", "<bos>", "<stop>"
HEAD_CATEGORY, HEAD_COLOR, HEAD_SIZE = "is-category", "is-color", "is-size"
HEAD_HALF, HEAD_QUADRANT, HEAD_ORDER = "in-half", "in-quadrant", "order"

# box width/height range per size id
SIZE_EXTENTS = ((0.05, 0.12), (0.12, 0.25), (0.25, 0.40))

N_ANSWERS = 3


class Answer(IntEnum):
    YES = 0
    NO = 1
    NA = 2

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def from_label(cls, label):
        return cls[label.upper()]


class Vocab:
    """Token table for the question mini-language."""

    def __init__(self):
        self.tokens = ((PAD, BOS, STOP,
                        HEAD_CATEGORY, HEAD_COLOR, HEAD_SIZE,
                        HEAD_HALF, HEAD_QUADRANT, HEAD_ORDER)
                       + CATEGORIES + COLORS + SIZES
                       + HALVES + QUADRANTS + AXES + RANKS)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.pad = self.index[PAD]
        self.bos = self.index[BOS]
        self.stop = self.index[STOP]

    def __len__(self):
        return len(self.tokens)

    def id(self, name):
        return self.index[name]

    def name(self, token_id):
        return self.tokens[token_id]

    def encode(self, text):
        """Whitespace-separated token names -> list of ids."""
        return [self.index[t] for t in text.split()]

    def decode(self, token_ids):
        return " ".join(self.tokens[t] for t in token_ids)


VOCAB = Vocab()


# ---------------------------------------------------------------------------
# scenes

@dataclass
class SceneObject:
    category: int
    color: int
    size: int
    bbox: tuple  # (x_min, y_min, x_max, y_max)

    @property
    def center(self):
        x0, y0, x1, y1 = self.bbox
        return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)


@dataclass
class Scene:
    objects: list
    features: np.ndarray  # (K, d_v)
    seed: int

    @property
    def k(self):
        return len(self.objects)


def quadrant_id(obj):
    cx, cy = obj.center
    return (0 if cy < 0.5 else 2) + (0 if cx < 0.5 else 1)


def rank_along(scene, axis):
    """1-based rank of every object by box center along an axis (ties by index)."""
    centers = [o.center[axis] for o in scene.objects]
    order = sorted(range(scene.k), key=lambda i: (centers[i], i))
    ranks = [0] * scene.k
    for pos, i in enumerate(order):
        ranks[i] = pos + 1
    return ranks


RAW_FEATURE_DIM = len(CATEGORIES) + len(COLORS) + len(SIZES) + 8
_PROJECTION_SEED = 104_729
_projections = {}


def _projection(d_v):
    if d_v not in _projections:
        rng = np.random.default_rng(_PROJECTION_SEED)
        _projections[d_v] = rng.normal(
            0.0, 1.0 / np.sqrt(RAW_FEATURE_DIM), (RAW_FEATURE_DIM, d_v))
    return _projections[d_v]


def spatial_vector(obj):
    """8-dim box descriptor: corners, center, width, height."""
    x0, y0, x1, y1 = obj.bbox
    cx, cy = obj.center
    return np.array([x0, y0, x1, y1, cx, cy, x1 - x0, y1 - y0])


def _raw_features(obj):
    vec = np.zeros(RAW_FEATURE_DIM)
    vec[obj.category] = 1.0
    vec[len(CATEGORIES) + obj.color] = 1.0
    vec[len(CATEGORIES) + len(COLORS) + obj.size] = 1.0
    vec[-8:] = spatial_vector(obj)
    return vec


def featurize(objects, seed, d_v=32, noise_sigma=0.05):
    """Deterministic object features: fixed random projection of one-hot
    attributes plus the 8-dim spatial vector, with scene-seeded noise."""
    raw = np.stack([_raw_features(o) for o in objects])
    noise = np.random.default_rng([int(seed), 1]).normal(
        0.0, noise_sigma, (len(objects), d_v))
    return raw @ _projection(d_v) + noise


def generate_scene(seed, k=8, d_v=32, noise_sigma=0.05):
    """Sample K objects uniformly over attributes; no two objects may share
    all of category, color, size, and quadrant."""
    if k < 2:
        raise ValueError(f"need at least 2 objects, got k={k}")
    max_combos = len(CATEGORIES) * len(COLORS) * len(SIZES) * 4
    if k > max_combos:
        raise ValueError(f"k={k} exceeds the {max_combos} distinct attribute combinations")
    rng = np.random.default_rng([int(seed), 0])
    objects, used = [], set()
    attempts = 0
    while len(objects) < k:
        attempts += 1
        if attempts > 10_000 * k:
            raise RuntimeError("could not place distinct objects")
        cat = int(rng.integers(len(CATEGORIES)))
        col = int(rng.integers(len(COLORS)))
        size = int(rng.integers(len(SIZES)))
        lo, hi = SIZE_EXTENTS[size]
        w, h = rng.uniform(lo, hi), rng.uniform(lo, hi)
        cx, cy = rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2)
        obj = SceneObject(cat, col, size,
                          (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2))
        key = (cat, col, size, quadrant_id(obj))
        if key in used:
            continue
        used.add(key)
        objects.append(obj)
    return Scene(objects, featurize(objects, seed, d_v, noise_sigma), int(seed))


# ---------------------------------------------------------------------------
# question parsing and the oracle

def parse_question(tokens):
    """Token ids -> predicate tuple, or None when malformed.

    Predicates: ("category"|"color"|"size"|"half"|"quadrant", value_id)
    and ("order", axis_id, rank).
    """
    tokens = list(tokens)
    if not tokens or any(not 0 <= t < len(VOCAB) for t in tokens):
        return None
    names = [VOCAB.name(t) for t in tokens]
    if names[-1] != STOP:
        return None
    body = names[:-1]
    if any(n in (PAD, BOS, STOP) for n in body):
        return None
    if len(body) == 2:
        head, value = body
        for head_name, kind, pool in ((HEAD_CATEGORY, "category", CATEGORIES),
                                      (HEAD_COLOR, "color", COLORS),
                                      (HEAD_SIZE, "size", SIZES),
                                      (HEAD_HALF, "half", HALVES),
                                      (HEAD_QUADRANT, "quadrant", QUADRANTS)):
            if head == head_name and value in pool:
                return (kind, pool.index(value))
        return None
    if len(body) == 3 and body[0] == HEAD_ORDER and body[1] in AXES and body[2] in RANKS:
        return ("order", AXES.index(body[1]), RANKS.index(body[2]) + 1)
    return None


def _holds(pred, scene, index):
    obj = scene.objects[index]
    kind = pred[0]
    if kind == "category":
        return obj.category == pred[1]
    if kind == "color":
        return obj.color == pred[1]
    if kind == "size":
        return obj.size == pred[1]
    if kind == "half":
        cx, cy = obj.center
        return (cx < 0.5, cx >= 0.5, cy < 0.5, cy >= 0.5)[pred[1]]
    if kind == "quadrant":
        return quadrant_id(obj) == pred[1]
    if kind == "order":
        return rank_along(scene, pred[1])[index] == pred[2]
    raise ValueError(f"unknown predicate {pred!r}")


def oracle_answer(scene, target_index, tokens):
    """YES/NO for well-formed questions, NA for anything else."""
    if not 0 <= target_index < scene.k:
        raise IndexError(f"target {target_index} out of range for k={scene.k}")
    pred = parse_question(tokens)
    if pred is None:
        return Answer.NA
    return Answer.YES if _holds(pred, scene, target_index) else Answer.NO


# ---------------------------------------------------------------------------
# question builders

def _question(*names):
    return [VOCAB.id(n) for n in names] + [VOCAB.stop]


def category_question(cat_id):
    return _question(HEAD_CATEGORY, CATEGORIES[cat_id])


def color_question(color_id):
    return _question(HEAD_COLOR, COLORS[color_id])


def size_question(size_id):
    return _question(HEAD_SIZE, SIZES[size_id])


def half_question(half_id):
    return _question(HEAD_HALF, HALVES[half_id])


def quadrant_question(quad_id):
    return _question(HEAD_QUADRANT, QUADRANTS[quad_id])


def order_question(axis_id, rank):
    return _question(HEAD_ORDER, AXES[axis_id], RANKS[rank - 1])


def stop_question():
    return [VOCAB.stop]


def is_stop_only(tokens):
    return list(tokens) == [VOCAB.stop]


def attribute_questions():
    return ([category_question(i) for i in range(len(CATEGORIES))]
            + [color_question(i) for i in range(len(COLORS))]
            + [size_question(i) for i in range(len(SIZES))])


def spatial_questions():
    return ([half_question(i) for i in range(len(HALVES))]
            + [quadrant_question(i) for i in range(len(QUADRANTS))])


def order_questions(max_rank=MAX_RANK):
    return [order_question(a, r)
            for a in range(len(AXES)) for r in range(1, max_rank + 1)]


def wellformed_questions():
    """Every well-formed question in the grammar (45 for the default vocab)."""
    return attribute_questions() + spatial_questions() + order_questions()


# ---------------------------------------------------------------------------
# scripted dialogue policy (twenty-questions splitter)

def splitter_pool(k):
    """Probes the scripted speaker draws from: every attribute and position
    question the listener can decode from its object encodings.  Colour is
    excluded on purpose — it never reaches the guesser's features (category
    and box geometry do), so a colour split would leave the listener choosing
    between otherwise-identical candidates."""
    return ([category_question(i) for i in range(len(CATEGORIES))]
            + [size_question(i) for i in range(len(SIZES))]
            + spatial_questions()
            + order_questions(min(k, MAX_RANK)))


def _best_split(scene, candidates, pool, asked):
    """Unasked probe minimizing the expected surviving candidate count
    (sum of squared answer-class sizes), ties to the earliest probe.
    Returns None when no unasked probe separates the candidates."""
    best, best_cost = None, None
    for q in pool:
        if tuple(q) in asked:
            continue
        classes = {}
        for i in candidates:
            a = oracle_answer(scene, i, q)
            classes[a] = classes.get(a, 0) + 1
        if len(classes) < 2:
            continue
        cost = sum(n * n for n in classes.values())
        if best_cost is None or cost < best_cost:
            best, best_cost = q, cost
    return best


def sample_human_dialogue(scene, target_index, seed, max_turns=8,
                          explore=0.25):
    """Scripted speaker transcript: a twenty-questions player that never sees
    the target.  While several objects remain consistent with the answers it
    asks the unasked probe that best splits them (balanced category / size /
    half splits early, rank questions once two or three candidates are left),
    filters by the oracle's answer, and repeats.  Once a single candidate
    remains it closes with a two-question confirmation coda — the survivor's
    category and quadrant, both still derived from the answers rather than
    from target access — and falls silent, so transcripts end on facts that
    name the target and never repeat a question.

    Keeping the speaker blind to the target matters for cloning: every
    question is a function of the scene and the answers so far — exactly the
    information a questioner playing the game has — so with `explore=0` the
    transcript for a scene is a deterministic decision tree and the answer mix
    is whatever the splits produce, not the "yes"-heavy texture a
    target-aware describer would leak.  With probability `explore` a turn
    asks a random unasked probe instead of the best split; the splitter then
    continues from whatever candidate set that detour left, which covers
    recovery behaviour for imperfect clones."""
    if not 0 <= target_index < scene.k:
        raise IndexError(f"target {target_index} out of range for k={scene.k}")
    rng = np.random.default_rng(seed)
    pool = splitter_pool(scene.k)
    candidates = list(range(scene.k))
    asked = set()
    dialogue = []
    while len(dialogue) < max_turns:
        question = None
        turns_left = max_turns - len(dialogue)
        if len(candidates) > 1:
            # explore only while the budget could still absorb a worst-case
            # run of one-against-the-rest splits, so transcripts always pin
            # the target no matter how the detours fall
            if turns_left > len(candidates) - 1 and rng.random() < explore:
                fresh = [q for q in pool if tuple(q) not in asked]
                if fresh:
                    question = fresh[int(rng.integers(len(fresh)))]
            if question is None:
                question = _best_split(scene, candidates, pool, asked)
        if question is None and len(candidates) == 1:
            # short confirmation coda: name the survivor's category and
            # quadrant, the two facts the listener reads off its object
            # encodings most directly, then fall silent
            obj = scene.objects[candidates[0]]
            for q in (category_question(obj.category),
                      quadrant_question(quadrant_id(obj))):
                if tuple(q) not in asked:
                    question = q
                    break
        if question is None:  # coda spoken: the game is over
            break
        answer = oracle_answer(scene, target_index, question)
        candidates = [i for i in candidates
                      if oracle_answer(scene, i, question) == answer]
        asked.add(tuple(question))
        dialogue.append((question, answer))
    return dialogue


# ---------------------------------------------------------------------------
# dataset records and JSON-lines serialization

@dataclass
class DialogueRecord:
    scene: Scene
    target: int
    dialogue: list  # [(token ids, Answer), ...]


def object_to_json(obj):
    return {"category": CATEGORIES[obj.category],
            "color": COLORS[obj.color],
            "size": SIZES[obj.size],
            "bbox": [float(v) for v in obj.bbox]}


def object_from_json(data):
    return SceneObject(CATEGORIES.index(data["category"]),
                       COLORS.index(data["color"]),
                       SIZES.index(data["size"]),
                       tuple(float(v) for v in data["bbox"]))


def record_to_json(record):
    return {"seed": record.scene.seed,
            "objects": [object_to_json(o) for o in record.scene.objects],
            "target": record.target,
            "dialogue": [{"tokens": [VOCAB.name(t) for t in q],
                          "answer": a.label}
                         for q, a in record.dialogue]}


def record_from_json(data, d_v=32, noise_sigma=0.05):
    objects = [object_from_json(o) for o in data["objects"]]
    scene = Scene(objects, featurize(objects, data["seed"], d_v, noise_sigma),
                  int(data["seed"]))
    dialogue = [([VOCAB.id(t) for t in qa["tokens"]],
                 Answer.from_label(qa["answer"]))
                for qa in data["dialogue"]]
    return DialogueRecord(scene, int(data["target"]), dialogue)


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec)) + "\n")


def read_jsonl(path, d_v=32, noise_sigma=0.05):
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_json(json.loads(line), d_v, noise_sigma))
    return records


def make_record(seed, k=8, d_v=32, max_turns=8, target=None):
    scene = generate_scene(seed, k, d_v)
    if target is None:
        target = int(np.random.default_rng([int(seed), 2]).integers(k))
    dialogue = sample_human_dialogue(scene, target, [int(seed), 4], max_turns)
    return DialogueRecord(scene, int(target), dialogue)


def resample_target(seed, k, original):
    """A fresh target for the "new object" split (never the original one)."""
    choices = [i for i in range(k) if i != original]
    return int(np.random.default_rng([int(seed), 3]).choice(choices))


def generate_dataset(out_dir, n_train, n_val, n_test,
                     k=8, d_v=32, max_turns=8, base_seed=1):
    """Write train/val/test_new_game/test_new_object JSONL splits.

    Train, val, and "new game" use disjoint seed blocks so their scenes never
    overlap.  "New object" reuses the first min(n_test, n_train) training
    scenes with a resampled target.  Returns {split: path}.
    """
    os.makedirs(out_dir, exist_ok=True)
    seeds = iter(range(base_seed, base_seed + n_train + n_val + n_test))
    train = [make_record(next(seeds), k, d_v, max_turns) for _ in range(n_train)]
    val = [make_record(next(seeds), k, d_v, max_turns) for _ in range(n_val)]
    new_game = [make_record(next(seeds), k, d_v, max_turns) for _ in range(n_test)]
    new_object = []
    for rec in train[:min(n_test, n_train)]:
        fresh = resample_target(rec.scene.seed, k, rec.target)
        new_object.append(DialogueRecord(
            rec.scene, fresh,
            sample_human_dialogue(rec.scene, fresh, [rec.scene.seed, 5], max_turns)))
    paths = {}
    for name, records in (("train", train), ("val", val),
                          ("test_new_game", new_game),
                          ("test_new_object", new_object)):
        paths[name] = os.path.join(out_dir, f"{name}.jsonl")
        write_jsonl(paths[name], records)
    return paths
