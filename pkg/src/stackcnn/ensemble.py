"""Fold ensembles and stacked ensembles of fold ensembles.

A fold ensemble is the c models from one c-fold cross-validation run under a
single hyperparameter point; it predicts with the uniform mean of its members.
A stacked ensemble is the top K fold ensembles by training-set F12 and
predicts with the uniform mean of their fold-ensemble predictions.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import f12_score
from .model import classify_batch, predict_proba_batch, train_model
from .rng import derive_seed, make_rng
from .text import PipelineConfig, encode_all

log = logging.getLogger(__name__)

SCORE_MODES = ("full", "heldout")


@dataclass(frozen=True)
class FoldPlan:
    c: int
    assignments: np.ndarray
    stratified: bool = True
    seed: int = 0

    def fold(self, j):
        return np.flatnonzero(self.assignments == j)

    def train(self, j):
        return np.flatnonzero(self.assignments != j)

    def sizes(self):
        return [int((self.assignments == j).sum()) for j in range(self.c)]


@dataclass
class FoldEnsemble:
    id: str
    hyperparams: object
    members: list
    train_score: float
    histories: list = field(default_factory=list, repr=False)


@dataclass
class StackedEnsemble:
    members: list

    @property
    def K(self):
        return len(self.members)


def _labels(dataset):
    if isinstance(dataset, tuple):
        return np.asarray(dataset[1])
    return np.array([getattr(ex, "label", ex) for ex in dataset])


def kfold_split(dataset, c=5, seed=0, stratified=True):
    """Assign every example to one of c folds.

    Examples are shuffled (per class when stratified), laid end to end and
    dealt round-robin, so both overall and per-class fold sizes differ by at
    most one.
    """
    labels = _labels(dataset)
    n = len(labels)
    if c < 2:
        raise ValueError(f"need at least 2 folds, got {c}")
    if c > n:
        raise ValueError(f"cannot split {n} examples into {c} folds")
    rng = make_rng(seed)
    if stratified:
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == cls)) for cls in np.unique(labels)])
    else:
        order = rng.permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % c
    return FoldPlan(c, assignments, stratified, seed)


def train_fold_ensemble(hp, tc, dataset, plan, table=None, seed=0, id="ensemble",
                        config=PipelineConfig(), score_mode="full"):
    """Train one model per fold (fold j held out for validation) and score the average.

    ``dataset`` is a list of LabeledExample (encoded here with ``table``) or a
    pre-encoded ``(X, y)`` pair. ``score_mode="full"`` scores fold-ensemble averages
    over the whole training set; ``"heldout"`` scores each example only with
    the member that did not train on it.
    """
    if score_mode not in SCORE_MODES:
        raise ValueError(f"score_mode must be one of {SCORE_MODES}")
    if isinstance(dataset, tuple):
        X, y = dataset
    else:
        X, y = encode_all(dataset, table, config)
    if len(plan.assignments) != len(X):
        raise ValueError(f"fold plan covers {len(plan.assignments)} examples, dataset has {len(X)}")

    members, histories = [], []
    for j in range(plan.c):
        tr, va = plan.train(j), plan.fold(j)
        tc_j = replace(tc, shuffle_seed=derive_seed(tc.shuffle_seed, seed, "shuffle", j))
        model, history = train_model(hp, tc_j, (X[tr], y[tr]), (X[va], y[va]),
                                     make_rng(derive_seed(seed, "init", j)))
        members.append(model)
        histories.append(history)
        log.info("%s fold %d/%d best val_f12 %.4f", id, j + 1, plan.c, max(h.val_f12 for h in history))

    ens = FoldEnsemble(id, hp, members, 0.0, histories)
    if score_mode == "full":
        probs = ensemble_proba(ens, X)
    else:
        probs = np.empty((len(X), 3))
        for j, model in enumerate(members):
            va = plan.fold(j)
            probs[va] = predict_proba_batch(model, X[va])
    ens.train_score = f12_score(y, classify_batch(probs))
    return ens


def ensemble_proba(ens, X):
    """Uniform mean of member distributions for a batch X."""
    return np.mean([predict_proba_batch(m, X) for m in ens.members], axis=0)


def fold_ensemble_predict(ens, example):
    return ensemble_proba(ens, example.matrix[None])[0]


def rank_ensembles(ensembles):
    """Descending train_score; stable, so ties keep training order."""
    if not ensembles:
        raise ValueError("no ensembles to rank")
    return sorted(ensembles, key=lambda e: -e.train_score)


def stack_top_k(ranked, K):
    if not 1 <= K <= len(ranked):
        raise ValueError(f"K must be in [1, {len(ranked)}], got {K}")
    return StackedEnsemble(list(ranked[:K]))


def stacked_proba(stack, X):
    return np.mean([ensemble_proba(e, X) for e in stack.members], axis=0)


def stacked_predict(stack, example):
    return stacked_proba(stack, example.matrix[None])[0]


def classify(distribution):
    """Class in {1, 2, 3} with the highest probability; ties go to the lower class."""
    distribution = np.asarray(distribution)
    if distribution.shape != (3,):
        raise ValueError(f"expected 3 probabilities, got shape {distribution.shape}")
    return int(np.argmax(distribution)) + 1

