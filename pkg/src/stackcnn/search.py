"""Random hyperparameter search over fold ensembles, the fixed-filter-size
ablation, and ranked-ensemble reports.
"""

import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .ensemble import ensemble_proba, rank_ensembles, train_fold_ensemble
from .metrics import f12_score
from .model import HyperParams, classify_batch
from .rng import derive_seed, make_rng
from .store import save_ensemble, write_json
from .text import PipelineConfig, encode_all

log = logging.getLogger(__name__)

FILTER_SIZE_LISTS = (
    (1, 2, 3, 4, 5),
    (2, 3, 4, 5, 6),
    (3, 4, 5, 6, 7),
    (1, 2, 2, 2, 3),
    (2, 3, 3, 3, 4),
    (3, 4, 4, 4, 5),
    (4, 5, 5, 5, 6),
)


@dataclass(frozen=True)
class SearchSpace:
    embedding_choice: tuple = ("godin", "shin")
    num_filters: tuple = (100, 200, 300, 400)
    filter_sizes: tuple = FILTER_SIZE_LISTS
    dense_size: tuple = (100, 200, 300, 400)
    dropout_p: tuple = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    batch_size: tuple = (50, 100, 150)
    learning_rate: tuple = (0.0001, 0.001)
    adam_beta2: tuple = (0.9, 0.999)

    def __post_init__(self):
        for f in fields(self):
            values = getattr(self, f.name)
            if f.name == "filter_sizes":
                values = tuple(tuple(v) for v in values)
            else:
                values = tuple(values)
            if not values:
                raise ValueError(f"search space field {f.name!r} is empty")
            object.__setattr__(self, f.name, values)

    @classmethod
    def from_overrides(cls, overrides=None):
        overrides = dict(overrides or {})
        unknown = set(overrides) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown search space fields: {sorted(unknown)}")
        return cls(**overrides)

    @property
    def cardinality(self):
        return int(np.prod([len(getattr(self, f.name)) for f in fields(self)]))

    def contains(self, hp):
        return all(getattr(hp, f.name) in getattr(self, f.name) for f in fields(self))

    def to_dict(self):
        return {f.name: [list(v) if isinstance(v, tuple) else v for v in getattr(self, f.name)]
                for f in fields(self)}


def sample_config(space, rng):
    """Draw every field independently and uniformly from its candidate set."""
    values = {}
    for f in fields(space):
        candidates = getattr(space, f.name)
        values[f.name] = candidates[int(rng.integers(len(candidates)))]
    return HyperParams(**values)


@dataclass
class SearchResult:
    index: int
    hyperparams: HyperParams
    id: str
    status: str = "ok"
    train_score: float = float("nan")
    error: str = None
    wall_time: float = 0.0
    manifest: str = None
    model_paths: list = field(default_factory=list)
    ensemble: object = field(default=None, repr=False)
    train_proba: np.ndarray = field(default=None, repr=False)
    test_proba: np.ndarray = field(default=None, repr=False)

    def record(self):
        return {
            "index": self.index,
            "hyperparams": self.hyperparams.to_dict(),
            "id": self.id,
            "train_score": self.train_score if self.status == "ok" else None,
            "status": self.status,
            "error": self.error,
            "manifest": self.manifest,
            "model_paths": self.model_paths,
        }


@dataclass
class SearchRun:
    n: int
    seed: int
    results: list = field(default_factory=list)
    failures: list = field(default_factory=list)


# Per-process state for training workers; set once by _init_worker.
_CTX = {}


def _init_worker(ctx):
    _CTX.clear()
    _CTX.update(ctx)
    _CTX["encoded"] = {}


def _encoded(choice, split):
    key = (choice, split)
    if key not in _CTX["encoded"]:
        examples = _CTX[split]
        if examples is None:
            _CTX["encoded"][key] = None
        else:
            table = _CTX["embeddings"][choice]
            _CTX["encoded"][key] = encode_all(examples, table, _CTX["config"])
    return _CTX["encoded"][key]


def _train_one(index, hp):
    ctx = _CTX
    ens_id = f"e{index:03d}"
    res = SearchResult(index, hp, ens_id)
    start = time.perf_counter()
    try:
        if hp.embedding_choice not in ctx["embeddings"]:
            raise KeyError(f"no embedding file configured for {hp.embedding_choice!r}")
        X, y = _encoded(hp.embedding_choice, "train")
        ens = train_fold_ensemble(hp, ctx["tc"], (X, y), ctx["plan"], seed=derive_seed(ctx["seed"], "ensemble", index),
                                  id=ens_id, config=ctx["config"], score_mode=ctx["score_mode"])
        res.train_score = ens.train_score
        res.train_proba = ensemble_proba(ens, X)
        test = _encoded(hp.embedding_choice, "test")
        if test is not None:
            res.test_proba = ensemble_proba(ens, test[0])
        if ctx["out_dir"] is not None:
            ens_dir = Path(ctx["out_dir"]) / "ensembles" / ens_id
            manifest = save_ensemble(ens, ens_dir)
            np.save(ens_dir / "train_proba.npy", res.train_proba)
            if res.test_proba is not None:
                np.save(ens_dir / "test_proba.npy", res.test_proba)
            res.manifest = str(manifest.relative_to(ctx["out_dir"]))
            res.model_paths = [f"ensembles/{ens_id}/fold_{j}.json" for j in range(len(ens.members))]
        else:
            res.ensemble = ens
    except Exception as exc:  # recorded per configuration; the search continues
        log.exception("configuration %d failed", index)
        res.status, res.error = "failed", f"{type(exc).__name__}: {exc}"
    res.wall_time = time.perf_counter() - start
    return res


def _load_previous(out_dir, configs):
    """Completed results from an earlier (possibly interrupted) run in ``out_dir``."""
    path = Path(out_dir) / "results.jsonl"
    done = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            i = rec["index"]
            if i >= len(configs):
                continue
            hp = HyperParams.from_dict(rec["hyperparams"])
            if hp != configs[i]:
                raise ValueError(
                    f"{path}: configuration {i} differs from this run's sampled configuration; "
                    "use a fresh output directory or the original seed"
                )
            res = SearchResult(i, hp, rec["id"], rec["status"], rec["train_score"], rec["error"],
                               manifest=rec["manifest"], model_paths=rec["model_paths"])
            if res.status == "ok":
                ens_dir = (Path(out_dir) / res.manifest).parent
                if not all((Path(out_dir) / p).exists() for p in res.model_paths):
                    continue  # retrain if files went missing
                res.train_proba = np.load(ens_dir / "train_proba.npy")
                test_file = ens_dir / "test_proba.npy"
                if test_file.exists():
                    res.test_proba = np.load(test_file)
            done[i] = res
    return done


def _write_results(out_dir, results):
    path = Path(out_dir) / "results.jsonl"
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for i in sorted(results):
            f.write(json.dumps(results[i].record()) + "\n")
    tmp.replace(path)


def run_search(space, n, dataset, plan, tc, embeddings, seed, out_dir=None, jobs=1,
               config=PipelineConfig(), test=None, score_mode="full"):
    """Sample n configurations, train one fold ensemble each, and rank them.

    ``embeddings`` maps embedding_choice to an EmbeddingTable. With
    ``out_dir`` every finished ensemble is written immediately together with
    ``results.jsonl``; re-running with the same seed skips finished work.
    Returns the SearchRun and the ranked successful SearchResults.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(derive_seed(seed, "search"))
    configs = [sample_config(space, rng) for _ in range(n)]
    done = {}
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        done = _load_previous(out_dir, configs)
        if done:
            log.info("resuming: %d of %d configurations already finished", len(done), n)

    ctx = {"train": dataset, "test": test, "embeddings": embeddings, "plan": plan, "tc": tc, "seed": seed,
           "config": config, "out_dir": out_dir, "score_mode": score_mode}
    todo = [i for i in range(n) if i not in done]

    def finish(res):
        done[res.index] = res
        log.info("config %d/%d %s %s score=%.4f (%.1fs)", res.index + 1, n, res.id, res.status,
                 res.train_score, res.wall_time)
        if out_dir is not None:
            _write_results(out_dir, done)

    if jobs <= 1 or len(todo) <= 1:
        _init_worker(ctx)
        for i in todo:
            finish(_train_one(i, configs[i]))
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as pool:
            futures = [pool.submit(_train_one, i, configs[i]) for i in todo]
            for fut in as_completed(futures):
                finish(fut.result())

    run = SearchRun(n, seed)
    for i in range(n):
        (run.results if done[i].status == "ok" else run.failures).append(done[i])
    ranked = rank_ensembles(run.results) if run.results else []
    return run, ranked


def ablation_config(base, space, rng):
    """Vary learning rate and filter count; everything else comes from ``base``."""
    lr = space.learning_rate[int(rng.integers(len(space.learning_rate)))]
    nf = space.num_filters[int(rng.integers(len(space.num_filters)))]
    return replace(base, learning_rate=lr, num_filters=nf)


def filter_size_experiment(dataset, plan, tc, embeddings, sizes, runs, seed, space=SearchSpace(),
                           base=None, config=PipelineConfig()):
    """Mean and sample standard deviation of fold-ensemble F12 per fixed filter size.

    Returns rows ``{"size", "mean", "std", "scores"}``, one per requested size.
    """
    if runs < 2:
        raise ValueError(f"need at least 2 runs for a standard deviation, got {runs}")
    if base is None:
        base = HyperParams(**{f.name: getattr(space, f.name)[0] for f in fields(space)})
    encoded = {}
    rows = []
    for size in sizes:
        scores = []
        for r in range(runs):
            rng = make_rng(derive_seed(seed, "ablate", size, r))
            hp = replace(ablation_config(base, space, rng), filter_sizes=(size,) * 5)
            if hp.embedding_choice not in encoded:
                encoded[hp.embedding_choice] = encode_all(dataset, embeddings[hp.embedding_choice], config)
            ens = train_fold_ensemble(hp, tc, encoded[hp.embedding_choice], plan,
                                      seed=derive_seed(seed, "ablate-ensemble", size, r), id=f"size{size}-run{r}")
            scores.append(ens.train_score)
        rows.append({"size": size, "mean": statistics.mean(scores), "std": statistics.stdev(scores),
                     "scores": scores})
    return rows


def summary_stats(scores):
    return statistics.mean(scores), statistics.stdev(scores)


# -- reports -----------------------------------------------------------------

def _score(proba, y):
    return f12_score(y, classify_batch(proba))


def emit_ranking_report(ranked, ks, y_train, y_test=None):
    """Per-ensemble and stacked-ensemble scores for a ranked list.

    Items need ``id``, ``train_score``, ``train_proba`` and (when ``y_test``
    is given) ``test_proba``. Returns a JSON-serializable dict.
    """
    if not ranked:
        raise ValueError("report needs at least one ranked ensemble")
    rows = []
    for rank, item in enumerate(ranked, start=1):
        row = {"rank": rank, "id": item.id, "train_score": item.train_score}
        if y_test is not None:
            row["test_score"] = _score(item.test_proba, y_test)
        rows.append(row)
    stacked = []
    for K in ks:
        if not 1 <= K <= len(ranked):
            stacked.append({"K": K, "error": f"K={K} outside [1, {len(ranked)}]"})
            continue
        top = ranked[:K]
        row = {"K": K, "train_score": _score(np.mean([e.train_proba for e in top], axis=0), y_train)}
        if y_test is not None:
            row["test_score"] = _score(np.mean([e.test_proba for e in top], axis=0), y_test)
        stacked.append(row)
    return {"ensembles": rows, "stacked": stacked}


def report_tsv(report):
    has_test = any("test_score" in r for r in report["ensembles"])
    cols = ["kind", "rank_or_K", "id", "train_score"] + (["test_score"] if has_test else []) + ["error"]
    lines = ["\t".join(cols)]
    for r in report["ensembles"]:
        vals = ["ensemble", str(r["rank"]), r["id"], f"{r['train_score']:.6f}"]
        if has_test:
            vals.append(f"{r['test_score']:.6f}")
        lines.append("\t".join(vals + [""]))
    for r in report["stacked"]:
        if "error" in r:
            vals = ["stacked", str(r["K"]), f"top{r['K']}", ""] + ([""] if has_test else []) + [r["error"]]
        else:
            vals = ["stacked", str(r["K"]), f"top{r['K']}", f"{r['train_score']:.6f}"]
            if has_test:
                vals.append(f"{r['test_score']:.6f}")
            vals.append("")
        lines.append("\t".join(vals))
    return "\n".join(lines) + "\n"


def report_text(report):
    has_test = any("test_score" in r for r in report["ensembles"])
    head = f"{'':<10}{'id':<8}{'train F12':>10}" + (f"{'test F12':>10}" if has_test else "")
    lines = [head]
    for r in report["ensembles"]:
        line = f"{'#' + str(r['rank']):<10}{r['id']:<8}{r['train_score']:>10.4f}"
        if has_test:
            line += f"{r['test_score']:>10.4f}"
        lines.append(line)
    lines.append("")
    for r in report["stacked"]:
        label = f"Top{r['K']}"
        if "error" in r:
            lines.append(f"{label:<18}error: {r['error']}")
            continue
        line = f"{label:<18}{r['train_score']:>10.4f}"
        if has_test:
            line += f"{r['test_score']:>10.4f}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def ablation_tsv(rows):
    lines = ["size\tmean\tstd\truns"]
    for r in rows:
        lines.append(f"{r['size']}\t{r['mean']:.6f}\t{r['std']:.6f}\t" + ",".join(f"{s:.6f}" for s in r["scores"]))
    return "\n".join(lines) + "\n"


def ablation_text(rows):
    lines = [f"{'size':>4}  {'mean F12':>9}  {'std':>8}"]
    for r in rows:
        lines.append(f"{r['size']:>4}  {r['mean']:>9.4f}  {r['std']:>8.4f}")
    return "\n".join(lines) + "\n"


def write_report(report, out_dir, stem="report"):
    out_dir = Path(out_dir)
    write_json(out_dir / f"{stem}.json", report)
    (out_dir / f"{stem}.tsv").write_text(report_tsv(report), encoding="utf-8")
    (out_dir / f"{stem}.txt").write_text(report_text(report), encoding="utf-8")
