"""The shallow text CNN: five convolution banks, max-over-time pooling,
one hidden dense layer and a 3-way softmax.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .metrics import f12_score
from .rng import make_rng

log = logging.getLogger(__name__)

NUM_CLASSES = 3
NUM_BANKS = 5
PREDICT_CHUNK = 256


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    embedding_choice: str = "godin"
    num_filters: int = 100
    filter_sizes: tuple = (1, 2, 3, 4, 5)
    dense_size: int = 100
    dropout_p: float = 0.5
    batch_size: int = 50
    learning_rate: float = 0.001
    adam_beta2: float = 0.999

    def __post_init__(self):
        object.__setattr__(self, "filter_sizes", tuple(int(s) for s in self.filter_sizes))
        if len(self.filter_sizes) != NUM_BANKS:
            raise ConfigError(f"filter_sizes needs exactly {NUM_BANKS} entries, got {list(self.filter_sizes)}")
        if min(self.filter_sizes) < 1:
            raise ConfigError(f"filter sizes must be >= 1, got {list(self.filter_sizes)}")
        for name in ("num_filters", "dense_size", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.dropout_p < 1:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.learning_rate <= 0 or not 0 < self.adam_beta2 < 1:
            raise ConfigError("learning_rate must be > 0 and adam_beta2 in (0, 1)")

    def to_dict(self):
        d = asdict(self)
        d["filter_sizes"] = list(self.filter_sizes)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class TrainingConfig:
    max_epochs: int = 30
    patience: int = 3
    max_restarts: int = 2
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("max_epochs and patience must be >= 1")
        if self.max_restarts < 0:
            raise ConfigError("max_restarts must be >= 0")


@dataclass
class ModelWeights:
    hyperparams: HyperParams
    embedding_dim: int
    max_len: int
    params: dict = field(default_factory=dict)

    @property
    def pooled_width(self):
        return NUM_BANKS * self.hyperparams.num_filters

    def copy(self):
        return ModelWeights(self.hyperparams, self.embedding_dim, self.max_len,
                            {k: v.copy() for k, v in self.params.items()})

    def astype(self, dtype):
        return ModelWeights(self.hyperparams, self.embedding_dim, self.max_len,
                            {k: v.astype(dtype) for k, v in self.params.items()})


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_f12: float
    learning_rate: float
    restarted: bool = False


def param_names():
    names = []
    for i in range(NUM_BANKS):
        names += [f"conv{i}_w", f"conv{i}_b"]
    return names + ["dense_w", "dense_b", "out_w", "out_b"]


def build_model(hp, dim, max_len, rng, dtype=np.float32):
    """Xavier-initialized weights with zero biases.

    Each position of ``filter_sizes`` gets its own bank, so repeated sizes
    give independent filters.
    """
    if max(hp.filter_sizes) > max_len:
        raise ConfigError(f"filter size {max(hp.filter_sizes)} exceeds max_len {max_len}")
    F = hp.num_filters
    params = {}
    for i, width in enumerate(hp.filter_sizes):
        params[f"conv{i}_w"] = nn.xavier_init(width * dim, F, rng, dtype).reshape(width, dim, F)
        params[f"conv{i}_b"] = np.zeros(F, dtype=dtype)
    params["dense_w"] = nn.xavier_init(NUM_BANKS * F, hp.dense_size, rng, dtype)
    params["dense_b"] = np.zeros(hp.dense_size, dtype=dtype)
    params["out_w"] = nn.xavier_init(hp.dense_size, NUM_CLASSES, rng, dtype)
    params["out_b"] = np.zeros(NUM_CLASSES, dtype=dtype)
    return ModelWeights(hp, dim, max_len, params)


def _check_input(model, X):
    if X.shape[-2:] != (model.max_len, model.embedding_dim):
        raise ValueError(
            f"input shape {X.shape[-2:]} does not match model ({model.max_len}, {model.embedding_dim})"
        )


def forward(model, X, rng=None, training=False):
    """Logits for a batch X of shape (B, max_len, dim), plus the backward cache."""
    _check_input(model, X)
    p = model.params
    pooled, conv_caches, argmaxes = [], [], []
    for i in range(NUM_BANKS):
        fmap, cache = nn.conv1d_forward(X, p[f"conv{i}_w"], p[f"conv{i}_b"])
        val, idx = nn.max_over_time(fmap)
        pooled.append(val)
        conv_caches.append(cache)
        argmaxes.append((idx, fmap.shape[-2]))
    h = np.concatenate(pooled, axis=-1)
    h_drop, mask = nn.dropout_apply(h, model.hyperparams.dropout_p, rng, training)
    a1, dense_cache = nn.dense_forward(h_drop, p["dense_w"], p["dense_b"], "relu")
    logits, out_cache = nn.dense_forward(a1, p["out_w"], p["out_b"], "identity")
    return logits, (conv_caches, argmaxes, mask, dense_cache, out_cache)


def backward(model, dlogits, cache):
    conv_caches, argmaxes, mask, dense_cache, out_cache = cache
    grads = {}
    da1, grads["out_w"], grads["out_b"] = nn.dense_backward(dlogits, out_cache)
    dh, grads["dense_w"], grads["dense_b"] = nn.dense_backward(da1, dense_cache)
    if mask is not None:
        dh = dh * mask
    F = model.hyperparams.num_filters
    for i in range(NUM_BANKS):
        idx, length = argmaxes[i]
        dfmap = nn.max_over_time_backward(dh[..., i * F : (i + 1) * F], idx, length)
        _, grads[f"conv{i}_w"], grads[f"conv{i}_b"] = nn.conv1d_backward(dfmap, conv_caches[i], input_grad=False)
    return grads


def loss_and_grads(model, X, y, rng=None, training=False):
    """Mean cross-entropy of labels y (classes 1..3) and its gradient per parameter block."""
    logits, cache = forward(model, X, rng, training)
    loss, dlogits = nn.softmax_cross_entropy(logits, y)
    return loss, backward(model, dlogits, cache)


def predict_proba_batch(model, X):
    out = np.empty((X.shape[0], NUM_CLASSES), dtype=np.float64)
    for start in range(0, X.shape[0], PREDICT_CHUNK):
        logits, _ = forward(model, X[start : start + PREDICT_CHUNK])
        out[start : start + PREDICT_CHUNK] = nn.softmax(logits.astype(np.float64))
    return out


def predict_proba(model, example):
    """Class distribution (classes 1, 2, 3) for one encoded example."""
    return predict_proba_batch(model, example.matrix[None])[0]


def classify_batch(probs):
    # argmax ties go to the lower class index
    return np.argmax(probs, axis=-1) + 1


def as_arrays(data):
    """Accept (X, y) or a list of EncodedExample."""
    if isinstance(data, tuple):
        return data
    X = np.stack([ex.matrix for ex in data])
    y = np.array([ex.label for ex in data], dtype=np.int64)
    return X, y


def train_model(hp, tc, train, validation, rng, dim=None, max_len=None):
    """Train one CNN with Adam and up to ``tc.max_restarts`` annealing restarts.

    ``rng`` drives weight init and dropout; ``tc.shuffle_seed`` drives batch
    order. Returns the best-validation-F12 weights and the per-epoch history.
    """
    X, y = as_arrays(train)
    Xv, yv = as_arrays(validation)
    if len(X) == 0 or len(Xv) == 0:
        raise ValueError("training and validation splits must be non-empty")
    max_len = max_len or X.shape[1]
    dim = dim or X.shape[2]
    model = build_model(hp, dim, max_len, rng)
    shuffler = make_rng(tc.shuffle_seed)
    state = nn.AdamState(learning_rate=hp.learning_rate, beta2=hp.adam_beta2)

    best_f, best_params = -1.0, None
    stale, restarts = 0, 0
    history = []
    for epoch in range(1, tc.max_epochs + 1):
        order = shuffler.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), hp.batch_size):
            batch = order[start : start + hp.batch_size]
            loss, grads = loss_and_grads(model, X[batch], y[batch], rng, training=True)
            nn.adam_step(model.params, grads, state)
            total += loss * len(batch)
        train_loss = total / len(X)
        val_f = f12_score(yv, classify_batch(predict_proba_batch(model, Xv)))

        if val_f > best_f:
            best_f, stale = val_f, 0
            best_params = {k: v.copy() for k, v in model.params.items()}
        else:
            stale += 1

        restarted, stop = False, False
        lr = state.learning_rate
        if stale >= tc.patience:
            if restarts < tc.max_restarts:
                state, model.params = nn.anneal_restart(state, best_params)
                restarts += 1
                stale = 0
                restarted = True
            else:
                stop = True
        history.append(EpochRecord(epoch, train_loss, val_f, lr, restarted))
        log.info("epoch %d loss %.4f val_f12 %.4f lr %g%s", epoch, train_loss, val_f, lr,
                 " restart" if restarted else "")
        if stop:
            break

    model.params = best_params
    return model, history
