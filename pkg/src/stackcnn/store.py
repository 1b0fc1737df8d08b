"""JSON persistence for models, fold-ensemble manifests and stacked ensembles.

Weights are written as nested lists of Python floats; float32 values widen to
float64 exactly and ``json`` writes the shortest round-tripping repr, so a
save/load cycle reproduces every array bit for bit. Paths inside manifests
are relative to the manifest's own directory.
"""

import json
import os
from pathlib import Path

import numpy as np

from .ensemble import FoldEnsemble, StackedEnsemble
from .model import HyperParams, ModelWeights

FORMAT_VERSION = 1


class MissingModelError(FileNotFoundError):
    def __init__(self, paths):
        self.paths = [str(p) for p in paths]
        super().__init__("missing model files: " + ", ".join(self.paths))


def write_json(path, obj):
    """Write atomically so an interrupted run never leaves a half-written file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=1, sort_keys=False)
        f.write("\n")
    os.replace(tmp, path)


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _check_version(doc, path):
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {doc.get('format_version')!r}")


def save_model(model, path):
    write_json(path, {
        "format_version": FORMAT_VERSION,
        "hyperparams": model.hyperparams.to_dict(),
        "embedding_dim": model.embedding_dim,
        "max_len": model.max_len,
        "dtype": str(next(iter(model.params.values())).dtype),
        "weights": {name: arr.tolist() for name, arr in model.params.items()},
    })


def load_model(path):
    doc = read_json(path)
    _check_version(doc, path)
    dtype = np.dtype(doc.get("dtype", "float32"))
    params = {name: np.array(v, dtype=dtype) for name, v in doc["weights"].items()}
    return ModelWeights(HyperParams.from_dict(doc["hyperparams"]), doc["embedding_dim"], doc["max_len"], params)


def save_ensemble(ens, directory):
    """Write member models and ``manifest.json`` under ``directory``; return the manifest path."""
    directory = Path(directory)
    members = []
    for j, model in enumerate(ens.members):
        name = f"fold_{j}.json"
        save_model(model, directory / name)
        members.append(name)
    manifest = directory / "manifest.json"
    write_json(manifest, {
        "format_version": FORMAT_VERSION,
        "id": ens.id,
        "hyperparams": ens.hyperparams.to_dict(),
        "c": len(ens.members),
        "members": members,
        "train_score": ens.train_score,
    })
    return manifest


def read_manifest(path):
    doc = read_json(path)
    _check_version(doc, path)
    return doc


def load_ensemble(manifest_path):
    manifest_path = Path(manifest_path)
    doc = read_manifest(manifest_path)
    paths = [manifest_path.parent / m for m in doc["members"]]
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise MissingModelError(missing)
    members = [load_model(p) for p in paths]
    return FoldEnsemble(doc["id"], HyperParams.from_dict(doc["hyperparams"]), members, doc["train_score"])


def save_stack(manifest_paths, path):
    path = Path(path)
    rel = [os.path.relpath(Path(p), path.parent) for p in manifest_paths]
    write_json(path, {"format_version": FORMAT_VERSION, "K": len(rel), "ensembles": rel})
    return path


def stack_manifest_paths(path):
    path = Path(path)
    doc = read_json(path)
    _check_version(doc, path)
    if doc["K"] != len(doc["ensembles"]):
        raise ValueError(f"{path}: K={doc['K']} but {len(doc['ensembles'])} ensembles listed")
    return [path.parent / p for p in doc["ensembles"]]


def load_stack(path):
    """Load a stacked-ensemble file, reporting every missing member file at once."""
    manifests = stack_manifest_paths(path)
    missing = [m for m in manifests if not m.exists()]
    for m in manifests:
        if m.exists():
            doc = read_manifest(m)
            missing += [p for p in (m.parent / x for x in doc["members"]) if not p.exists()]
    if missing:
        raise MissingModelError(missing)
    return StackedEnsemble([load_ensemble(m) for m in manifests])
