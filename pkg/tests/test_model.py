import numpy as np
import pytest

from stackcnn.ensemble import kfold_split
from stackcnn.metrics import f12_score
from stackcnn.model import (
    ConfigError,
    HyperParams,
    TrainingConfig,
    build_model,
    classify_batch,
    forward,
    predict_proba,
    predict_proba_batch,
    train_model,
)
from stackcnn.rng import make_rng
from stackcnn.text import EncodedExample, PipelineConfig, encode_all


def test_hyperparams_round_trip():
    hp = HyperParams(embedding_choice="shin", filter_sizes=[2, 3, 3, 3, 4], dropout_p=0.7)
    assert HyperParams.from_dict(hp.to_dict()) == hp


@pytest.mark.parametrize("kwargs", [
    {"filter_sizes": (1, 2, 3)},
    {"filter_sizes": (0, 1, 2, 3, 4)},
    {"num_filters": 0},
    {"dropout_p": 1.0},
    {"learning_rate": 0.0},
])
def test_hyperparams_invalid(kwargs):
    with pytest.raises(ConfigError):
        HyperParams(**kwargs)


def test_filter_wider_than_input():
    hp = HyperParams(num_filters=2, filter_sizes=(4, 5, 5, 5, 6), dense_size=3)
    with pytest.raises(ConfigError):
        build_model(hp, 4, 5, make_rng(0))


def test_shapes(tiny):
    model = tiny(0, dtype=np.float32)
    shapes = {k: v.shape for k, v in model.params.items()}
    assert shapes["conv0_w"] == (1, 4, 2) and shapes["conv4_w"] == (5, 4, 2)
    assert shapes["dense_w"] == (10, 3) and shapes["out_w"] == (3, 3)
    assert all(v.dtype == np.float32 for v in model.params.values())
    logits, _ = forward(model, np.zeros((7, 5, 4), dtype=np.float32))
    assert logits.shape == (7, 3)


def test_zero_weights_give_uniform(tiny):
    model = tiny(0)
    for v in model.params.values():
        v[...] = 0
    p = predict_proba(model, EncodedExample("x", 1, make_rng(1).standard_normal((5, 4))))
    np.testing.assert_allclose(p, [1 / 3] * 3, atol=1e-15)


def test_repeated_filter_sizes_get_independent_banks(tiny):
    model = tiny(0, filter_sizes=(2, 2, 2, 2, 2))
    assert not np.array_equal(model.params["conv0_w"], model.params["conv1_w"])


def test_inference_is_deterministic(tiny):
    model = tiny(4)
    X = make_rng(0).standard_normal((3, 5, 4))
    assert predict_proba_batch(model, X).tobytes() == predict_proba_batch(model, X).tobytes()


def test_input_shape_checked(tiny):
    with pytest.raises(ValueError):
        forward(tiny(0), np.zeros((1, 6, 4)))


def _toy(n, seed=0, only=None):
    rng = make_rng(seed)
    y = np.full(n, only) if only else np.tile([1, 2, 3], n // 3)
    X = rng.standard_normal((n, 5, 4)) * 0.1
    X[np.arange(n), 0, y - 1] += 2.0
    return X.astype(np.float32), y


HP = HyperParams(num_filters=4, filter_sizes=(1, 1, 2, 2, 3), dense_size=6, batch_size=6, dropout_p=0.4)


def test_restart_cap():
    # validation F12 is always 0 when every gold label is 3, so each epoch after the first is stale
    tc = TrainingConfig(max_epochs=30, patience=1, max_restarts=2)
    _, history = train_model(HP, tc, _toy(12), _toy(6, 1, only=3), make_rng(0))
    assert len(history) == 4
    assert [h.restarted for h in history] == [False, True, True, False]
    assert [h.learning_rate for h in history] == pytest.approx([0.001, 0.001, 0.0005, 0.00025])


def test_returns_best_checkpoint():
    tc = TrainingConfig(max_epochs=8, patience=2)
    train, val = _toy(30), _toy(12, 1)
    model, history = train_model(HP, tc, train, val, make_rng(3))
    best = max(h.val_f12 for h in history)
    assert f12_score(val[1], classify_batch(predict_proba_batch(model, val[0]))) == pytest.approx(best)


def test_training_is_deterministic():
    tc = TrainingConfig(max_epochs=3, shuffle_seed=7)
    a, ha = train_model(HP, tc, _toy(18), _toy(6, 1), make_rng(2))
    b, hb = train_model(HP, tc, _toy(18), _toy(6, 1), make_rng(2))
    assert ha == hb
    for k in a.params:
        assert a.params[k].tobytes() == b.params[k].tobytes()


def test_empty_split_rejected():
    X, y = _toy(6)
    with pytest.raises(ValueError):
        train_model(HP, TrainingConfig(), (X, y), (X[:0], y[:0]), make_rng(0))


def test_learns_synthetic_corpus(synthetic_corpus, synthetic_table):
    X, y = encode_all(synthetic_corpus, synthetic_table, PipelineConfig())
    plan = kfold_split(y, c=3, seed=0)
    hp = HyperParams(num_filters=100, dense_size=100, batch_size=10, dropout_p=0.4)
    model, _ = train_model(hp, TrainingConfig(max_epochs=30, patience=8), (X[plan.train(0)], y[plan.train(0)]),
                           (X[plan.fold(0)], y[plan.fold(0)]), make_rng(0))
    assert f12_score(y, classify_batch(predict_proba_batch(model, X))) >= 0.95
