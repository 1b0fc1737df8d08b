"""Run configuration: one JSON file.

Input paths resolve against the config file's directory; ``output_dir``
resolves against the working directory.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import TrainingConfig
from .rng import derive_seed
from .search import SearchSpace
from .text import PipelineConfig


class ConfigFileError(ValueError):
    pass


@dataclass
class RunConfig:
    train_file: Path = None
    test_file: Path = None
    embeddings: dict = field(default_factory=dict)
    output_dir: Path = Path("run")
    pipeline: PipelineConfig = PipelineConfig()
    training: TrainingConfig = TrainingConfig()
    space: SearchSpace = SearchSpace()
    n: int = 100
    c: int = 5
    k: list = field(default_factory=lambda: [3, 10, 20])
    seed: int = 0
    stratified: bool = True
    score_mode: str = "full"

    def fold_seed(self):
        return derive_seed(self.seed, "folds")

    def training_config(self):
        return replace(self.training, shuffle_seed=derive_seed(self.seed, "shuffle"))

    def input_paths(self):
        paths = [("train_file", self.train_file)]
        if self.test_file is not None:
            paths.append(("test_file", self.test_file))
        paths += [(f"embeddings.{k}", v) for k, v in self.embeddings.items()]
        return paths


KNOWN_KEYS = {"train_file", "test_file", "embeddings", "output_dir", "pipeline", "training", "space",
              "n", "c", "k", "seed", "stratified", "score_mode"}


def load_config(path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ConfigFileError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigFileError(f"{path}: top level must be an object")
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigFileError(f"{path}: unknown keys {sorted(unknown)}")
    base = path.parent

    def resolve(p):
        return None if p is None else (base / p)

    try:
        cfg = RunConfig(
            train_file=resolve(doc.get("train_file")),
            test_file=resolve(doc.get("test_file")),
            embeddings={k: resolve(v) for k, v in doc.get("embeddings", {}).items()},
            output_dir=Path(doc.get("output_dir", "run")),
            pipeline=PipelineConfig(**doc.get("pipeline", {})),
            training=TrainingConfig(**doc.get("training", {})),
            space=SearchSpace.from_overrides(doc.get("space")),
            n=int(doc.get("n", 100)),
            c=int(doc.get("c", 5)),
            k=[int(x) for x in doc.get("k", [3, 10, 20])],
            seed=int(doc.get("seed", 0)),
            stratified=bool(doc.get("stratified", True)),
            score_mode=doc.get("score_mode", "full"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigFileError(f"{path}: {exc}") from None
    if cfg.train_file is None:
        raise ConfigFileError(f"{path}: train_file is required")
    if cfg.score_mode not in ("full", "heldout"):
        raise ConfigFileError(f"{path}: score_mode must be 'full' or 'heldout'")
    return cfg
