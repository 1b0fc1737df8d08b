"""Keyword-separable toy corpus and embedding file used by the smoke tests.

Each example carries exactly one class keyword among filler words (and
sometimes one out-of-vocabulary word), so the class is a function of which
keyword appears.
"""

from pathlib import Path

import numpy as np

from .rng import make_rng

KEYWORDS = {1: ("took", "swallowed"), 2: ("might", "should"), 3: ("sale", "news")}
FILLERS = ("i", "the", "advil", "today")
OOV_WORDS = ("aspirin", "headache", "#pain")
DIM = 8
PER_CLASS = 20


def vocabulary():
    return [w for c in (1, 2, 3) for w in KEYWORDS[c]] + list(FILLERS)


def make_corpus(seed=0, per_class=PER_CLASS):
    rng = make_rng(seed)
    rows = []
    for label in (1, 2, 3):
        for _ in range(per_class):
            words = list(rng.choice(FILLERS, size=rng.integers(2, 6)))
            if rng.random() < 0.3:
                words.append(str(rng.choice(OOV_WORDS)))
            pos = int(rng.integers(0, len(words) + 1))
            words.insert(pos, str(rng.choice(KEYWORDS[label])))
            rows.append((label, " ".join(str(w) for w in words)))
    order = rng.permutation(len(rows))
    return [(f"s{i:03d}", rows[k][0], rows[k][1]) for i, k in enumerate(order)]


def make_embeddings(seed=1, dim=DIM):
    rng = make_rng(seed)
    return {w: np.round(rng.standard_normal(dim), 4) for w in vocabulary()}


def write_corpus(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        for ex_id, label, text in rows:
            f.write(f"{ex_id}\t{label}\t{text}\n")


def write_embeddings(path, vectors):
    dim = len(next(iter(vectors.values())))
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"{len(vectors)} {dim}\n")
        for word, vec in vectors.items():
            f.write(word + " " + " ".join(f"{x:.4f}" for x in vec) + "\n")


def data_dir():
    return Path(__file__).parent / "data"


def regenerate(directory=None):
    """Rewrite the bundled corpus and embedding files."""
    directory = Path(directory or data_dir())
    write_corpus(directory / "synthetic_train.tsv", make_corpus())
    write_embeddings(directory / "synthetic_emb.txt", make_embeddings())
