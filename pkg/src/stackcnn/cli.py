"""Command-line entry points.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 runtime failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .config import ConfigFileError, load_config
from .ensemble import ensemble_proba, kfold_split, rank_ensembles
from .metrics import evaluation_record, format_evaluation
from .model import classify_batch
from .search import (ablation_text, ablation_tsv, emit_ranking_report, filter_size_experiment, report_text,
                     run_search, write_report)
from .store import MissingModelError, load_stack, save_stack, write_json
from .text import CLASSES, DataFormatError, class_counts, encode_all, load_dataset, load_embeddings

log = logging.getLogger("stackcnn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "n", None) is not None:
        cfg.n = args.n
    if getattr(args, "folds", None) is not None:
        cfg.c = args.folds
    if getattr(args, "top_k", None):
        cfg.k = list(args.top_k)
    if getattr(args, "out", None) is not None:
        cfg.output_dir = Path(args.out)
    return cfg


def _require_inputs(cfg, choices=None):
    missing = []
    for name, p in cfg.input_paths():
        if choices is not None and name.startswith("embeddings.") and name.split(".", 1)[1] not in choices:
            continue
        if not Path(p).exists():
            missing.append(f"{name}: {p}")
    if missing:
        raise DataError("missing input files: " + "; ".join(missing))


def _load_tables(cfg, choices):
    tables = {}
    for choice in sorted(set(choices)):
        if choice not in cfg.embeddings:
            raise ConfigFileError(f"no embedding file configured for {choice!r}")
        tables[choice] = load_embeddings(cfg.embeddings[choice])
    return tables


def _jobs(args):
    return args.jobs if args.jobs else (os.cpu_count() or 1)


# -- validate ----------------------------------------------------------------

def distribution_table(rows):
    lines = [f"{'':<8}" + "".join(f"{'Class ' + str(c):>10}" for c in CLASSES) + f"{'Total':>10}"]
    for name, counts in rows:
        lines.append(f"{name:<8}" + "".join(f"{counts[c]:>10}" for c in CLASSES) + f"{sum(counts.values()):>10}")
    return "\n".join(lines)


def cmd_validate(args):
    cfg = _config(args)
    errors, rows = [], []
    for name, path in (("Train", cfg.train_file), ("Test", cfg.test_file)):
        if path is None:
            continue
        if not Path(path).exists():
            errors.append(f"{path}: file not found")
            continue
        try:
            rows.append((name, class_counts(load_dataset(path))))
        except DataFormatError as exc:
            errors.append(str(exc))
    for choice, path in sorted(cfg.embeddings.items()):
        if not Path(path).exists():
            errors.append(f"{path}: embedding file not found (embedding {choice!r})")
            continue
        try:
            table = load_embeddings(path)
            print(f"embedding {choice}: {len(table)} words, dim {table.dim}")
        except DataFormatError as exc:
            errors.append(str(exc))
    unused = set(cfg.space.embedding_choice) - set(cfg.embeddings)
    for choice in sorted(unused):
        errors.append(f"search space names embedding {choice!r} but no file is configured")
    for s in cfg.space.filter_sizes:
        if max(s) > cfg.pipeline.max_len:
            errors.append(f"filter sizes {list(s)} exceed max_len {cfg.pipeline.max_len}")
    if rows:
        print(distribution_table(rows))
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_DATA if errors else EXIT_OK


# -- search ------------------------------------------------------------------

def cmd_search(args):
    cfg = _config(args)
    _require_inputs(cfg, cfg.space.embedding_choice)
    train = load_dataset(cfg.train_file)
    test = load_dataset(cfg.test_file) if cfg.test_file else None
    tables = _load_tables(cfg, cfg.space.embedding_choice)
    plan = kfold_split(train, cfg.c, cfg.fold_seed(), cfg.stratified)
    out = Path(cfg.output_dir)
    run, ranked = run_search(cfg.space, cfg.n, train, plan, cfg.training_config(), tables, cfg.seed,
                             out_dir=out, jobs=_jobs(args), config=cfg.pipeline, test=test,
                             score_mode=cfg.score_mode)
    for res in run.failures:
        print(f"configuration {res.index} failed: {res.error}", file=sys.stderr)
    if not ranked:
        print("no configuration trained successfully", file=sys.stderr)
        return EXIT_RUNTIME
    y_train = np.array([ex.label for ex in train])
    y_test = np.array([ex.label for ex in test]) if test else None
    report = emit_ranking_report(ranked, cfg.k, y_train, y_test)
    for row, res in zip(report["ensembles"], ranked):
        row["manifest"] = res.manifest
    write_report(report, out)
    print(report_text(report), end="")
    return EXIT_OK


# -- stack -------------------------------------------------------------------

def ranked_manifests(out_dir):
    path = Path(out_dir) / "results.jsonl"
    if not path.exists():
        raise UsageError(f"no completed search in {out_dir} (missing {path.name})")
    with open(path, encoding="utf-8") as f:
        records = [json.loads(line) for line in f if line.strip()]
    ok = [SimpleNamespace(**r) for r in records if r["status"] == "ok"]
    if not ok:
        raise UsageError(f"search in {out_dir} has no successful ensembles")
    return [Path(out_dir) / r.manifest for r in rank_ensembles(ok)]


def cmd_stack(args):
    cfg = _config(args)
    if not args.top_k or len(args.top_k) != 1:
        raise UsageError("stack needs exactly one --top-k value")
    K = args.top_k[0]
    if K < 1:
        raise UsageError(f"--top-k must be >= 1, got {K}")
    manifests = ranked_manifests(cfg.output_dir)
    if K > len(manifests):
        raise UsageError(f"--top-k {K} exceeds the {len(manifests)} available ensembles")
    path = save_stack(manifests[:K], Path(cfg.output_dir) / f"stacked_top{K}.json")
    print(path)
    return EXIT_OK


# -- evaluate / predict ------------------------------------------------------

def stack_proba_examples(stack, examples, tables, pipeline):
    """Stacked distribution per example; each ensemble sees its own embedding."""
    encoded = {}
    preds = []
    for ens in stack.members:
        choice = ens.hyperparams.embedding_choice
        if choice not in encoded:
            encoded[choice] = encode_all(examples, tables[choice], pipeline)[0]
        preds.append(ensemble_proba(ens, encoded[choice]))
    return np.mean(preds, axis=0)


def _load_stack_for(cfg, stack_path):
    stack = load_stack(stack_path)
    choices = {e.hyperparams.embedding_choice for e in stack.members}
    _require_inputs(cfg, choices)
    return stack, _load_tables(cfg, choices)


def cmd_evaluate(args):
    cfg = _config(args)
    stack, tables = _load_stack_for(cfg, args.stack)
    examples = load_dataset(args.dataset)
    if not examples:
        raise DataError(f"{args.dataset}: no examples to evaluate")
    probs = stack_proba_examples(stack, examples, tables, cfg.pipeline)
    record = evaluation_record([ex.label for ex in examples], classify_batch(probs).tolist())
    out = Path(args.out) if args.out else Path(args.stack).parent
    stem = Path(args.stack).stem + "_eval"
    write_json(out / f"{stem}.json", record)
    text = format_evaluation(record)
    (out / f"{stem}.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_predict(args):
    cfg = _config(args)
    stack, tables = _load_stack_for(cfg, args.stack)
    examples = load_dataset(args.input, require_labels=False)
    output = Path(args.output) if args.output else Path(cfg.output_dir) / "predictions.tsv"
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, "w", encoding="utf-8", newline="") as f:
        if examples:
            probs = stack_proba_examples(stack, examples, tables, cfg.pipeline)
            for ex, p, label in zip(examples, probs, classify_batch(probs)):
                f.write(f"{ex.id}\t{label}\t{p[0]:.6f}\t{p[1]:.6f}\t{p[2]:.6f}\n")
    print(output)
    return EXIT_OK


# -- ablate-filters ----------------------------------------------------------

def cmd_ablate(args):
    cfg = _config(args)
    _require_inputs(cfg, cfg.space.embedding_choice)
    train = load_dataset(cfg.train_file)
    tables = _load_tables(cfg, cfg.space.embedding_choice)
    plan = kfold_split(train, cfg.c, cfg.fold_seed(), cfg.stratified)
    rows = filter_size_experiment(train, plan, cfg.training_config(), tables, args.sizes, args.runs, cfg.seed,
                                  space=cfg.space, config=cfg.pipeline)
    out = Path(cfg.output_dir)
    write_json(out / "ablation.json", rows)
    (out / "ablation.tsv").write_text(ablation_tsv(rows), encoding="utf-8")
    (out / "ablation.txt").write_text(ablation_text(rows), encoding="utf-8")
    print(ablation_text(rows), end="")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    common.add_argument("--n", type=int, help="number of sampled configurations")
    common.add_argument("--folds", type=int, help="number of cross-validation folds")
    common.add_argument("--top-k", type=int, nargs="+", help="K values (stack takes exactly one)")
    common.add_argument("--out", help="output/run directory")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress per-epoch logging")

    parser = Parser(prog="stackcnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    sub.add_parser("validate", parents=[common], help="check inputs and print the class distribution")
    sub.add_parser("search", parents=[common], help="random search over fold ensembles")
    sub.add_parser("stack", parents=[common], help="write the top-K stacked ensemble")
    p = sub.add_parser("evaluate", parents=[common], help="score a stacked ensemble on a labeled dataset")
    p.add_argument("stack")
    p.add_argument("dataset")
    p = sub.add_parser("predict", parents=[common], help="predict labels for a dataset file")
    p.add_argument("stack")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="predictions file (default: <out>/predictions.tsv)")
    p = sub.add_parser("ablate-filters", parents=[common], help="fixed filter-size experiment")
    p.add_argument("--sizes", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6, 7])
    p.add_argument("--runs", type=int, default=4)
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "search": cmd_search,
    "stack": cmd_stack,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "ablate-filters": cmd_ablate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(name)s %(message)s", force=True)
    if args.jobs is not None and args.jobs < 1:
        print("stackcnn: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (ConfigFileError, UsageError) as exc:
        print(f"stackcnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, DataError, MissingModelError, FileNotFoundError) as exc:
        print(f"stackcnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        log.exception("runtime failure")
        print(f"stackcnn: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
