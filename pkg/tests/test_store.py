from pathlib import Path

import numpy as np
import pytest

from stackcnn.ensemble import FoldEnsemble
from stackcnn.model import HyperParams
from stackcnn.store import (
    MissingModelError,
    load_ensemble,
    load_model,
    load_stack,
    save_ensemble,
    save_model,
    save_stack,
)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_model_round_trip_exact(tmp_path, tiny, dtype):
    model = tiny(3, dtype=dtype)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.hyperparams == model.hyperparams
    assert (back.embedding_dim, back.max_len) == (model.embedding_dim, model.max_len)
    for k, v in model.params.items():
        assert back.params[k].dtype == v.dtype
        assert back.params[k].tobytes() == v.tobytes()


def test_model_rejects_unknown_version(tmp_path, tiny):
    save_model(tiny(0), tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text().replace('"format_version": 1', '"format_version": 99')
    (tmp_path / "m.json").write_text(text)
    with pytest.raises(ValueError):
        load_model(tmp_path / "m.json")


def _ensemble(tiny, name, seed):
    return FoldEnsemble(name, HyperParams(num_filters=2, dense_size=3), [tiny(seed), tiny(seed + 1)], 0.5)


def test_ensemble_and_stack_round_trip(tmp_path, tiny):
    manifests = [save_ensemble(_ensemble(tiny, f"e{i}", i * 10), tmp_path / f"e{i}") for i in range(2)]
    ens = load_ensemble(manifests[0])
    assert ens.id == "e0" and ens.train_score == 0.5 and len(ens.members) == 2
    stack = load_stack(save_stack(manifests, tmp_path / "stack.json"))
    assert stack.K == 2 and [e.id for e in stack.members] == ["e0", "e1"]


def test_stack_reports_all_missing_files(tmp_path, tiny):
    manifests = [save_ensemble(_ensemble(tiny, f"e{i}", i), tmp_path / f"e{i}") for i in range(2)]
    path = save_stack(manifests + [tmp_path / "gone" / "manifest.json"], tmp_path / "stack.json")
    (tmp_path / "e1" / "fold_1.json").unlink()
    with pytest.raises(MissingModelError) as err:
        load_stack(path)
    names = {Path(p).name for p in err.value.paths}
    assert "fold_1.json" in names and "manifest.json" in names
    assert len(err.value.paths) == 2


def test_write_is_byte_stable(tmp_path, tiny):
    save_model(tiny(1), tmp_path / "a.json")
    save_model(tiny(1), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert not list(tmp_path.glob("*.tmp"))
