"""Command-line interface: train, tune, predict, eval, explain.

Binary problems produce a single model file; more than two classes
produce a one-vs-rest container directory holding one model per class
plus a ``manifest.json``.  Exit codes: 0 success, 2 data/usage errors,
3 solver failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .bags import Bag, LabeledSample, load_mil_jsonl, load_timeseries_csv
from .errors import DataError, SolverError
from .estimator import (
    prepare_grams,
    prepare_pools,
    resolve_lengths,
    series_to_bags,
    train_signed,
)
from .kernels import KernelSpec
from .model import (
    BoostModel,
    explain,
    load_model,
    margin_loss,
    save_model,
    score_bags,
)

__all__ = ["main", "tune_grid", "stratified_folds"]

SL_NU_GRID = (0.1, 0.2, 0.3, 0.4)
SL_INV_SIGMA2_GRID = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0)
MIL_NU_GRID = (0.5, 0.3, 0.2, 0.15, 0.1)
MIL_SIGMA2_GRID = (0.005, 0.01, 0.05, 0.1, 0.5, 1.0)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# dataset loading


def _parse_number_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise DataError(f"expected a comma-separated number list, got {text!r}") from None


def _parse_lengths(text: str | None) -> list[float | int] | None:
    if text is None:
        return None
    out: list[float | int] = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(float(tok) if "." in tok else int(tok))
        except ValueError:
            raise DataError(f"invalid length token {tok!r}") from None
    if not out:
        raise DataError("empty --lengths")
    return out


def _load_dataset(
    task: str, path: str, lengths_arg: str | None, znorm: bool
) -> tuple[list[Bag], np.ndarray, tuple[int, ...]]:
    """Load either data format and return (bags, labels, lengths)."""
    try:
        if task == "timeseries":
            X, y = load_timeseries_csv(path)
            lengths = resolve_lengths(_parse_lengths(lengths_arg), X.shape[1])
            return series_to_bags(X, lengths, znorm=znorm), y, lengths
        sample = load_mil_jsonl(path)
        lengths = tuple(sorted({l for bag in sample.bags for l in bag.lengths}))
        return list(sample.bags), sample.labels, lengths
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


# ---------------------------------------------------------------------------
# model container handling (one-vs-rest)


def _save_container(
    outdir: Path, classes: np.ndarray, models: list[BoostModel], meta: dict
) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    files = {}
    for label, model in zip(classes, models):
        name = f"class_{int(label)}.json"
        save_model(model, str(outdir / name))
        files[str(int(label))] = name
    manifest = {"container": "one-vs-rest", "version": 1, "files": files}
    manifest.update(meta)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _load_models(path: str) -> tuple[list[int] | None, list[BoostModel]]:
    """Load a model file or a one-vs-rest container directory.

    Returns ``(classes, models)`` where ``classes`` is ``None`` for a
    plain binary model.
    """
    p = Path(path)
    if p.is_dir():
        manifest_path = p / "manifest.json"
        if not manifest_path.is_file():
            raise DataError(f"{path}: container directory lacks manifest.json")
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{manifest_path}: invalid JSON: {exc}") from None
        files = manifest.get("files")
        if not isinstance(files, dict) or not files:
            raise DataError(f"{manifest_path}: missing model file table")
        classes = sorted(int(c) for c in files)
        models = [load_model(str(p / files[str(c)])) for c in classes]
        return classes, models
    return None, [load_model(path)]


def _model_task(models: list[BoostModel], flag: str) -> tuple[str, bool]:
    """Resolve (task, znorm) for prediction, preferring model metadata."""
    meta = models[0].meta
    task = meta.get("task", flag)
    znorm = bool(meta.get("znorm", False))
    return task, znorm


def _scores_and_labels(
    classes: list[int] | None, models: list[BoostModel], bags: list[Bag]
) -> tuple[np.ndarray, np.ndarray]:
    if classes is None:
        scores = score_bags(models[0], bags)
        labels = np.where(scores >= 0.0, 1, -1).astype(np.int64)
        return scores, labels
    matrix = np.column_stack([score_bags(m, bags) for m in models])
    winner = np.argmax(matrix, axis=1)
    scores = matrix[np.arange(len(bags)), winner]
    labels = np.asarray(classes, dtype=np.int64)[winner]
    return scores, labels


# ---------------------------------------------------------------------------
# cross-validation machinery


def stratified_folds(
    labels: np.ndarray, folds: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Deal shuffled per-class indices round-robin into ``folds`` folds."""
    labels = np.asarray(labels)
    assignment = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for value in np.unique(labels):
        idx = np.flatnonzero(labels == value)
        idx = idx[rng.permutation(idx.size)]
        for pos, i in enumerate(idx):
            assignment[i] = (offset + pos) % folds
        offset += idx.size
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def _single_float(text: str, flag: str) -> float:
    values = _parse_number_list(text)
    if len(values) != 1:
        raise DataError(f"{flag} takes a single value here, got {text!r}")
    return values[0]


def tune_grid(
    bags: list[Bag],
    labels: np.ndarray,
    lengths: tuple[int, ...],
    nu_grid: list[float],
    sigma2_grid: list[float | None],
    *,
    kernel: str = "gaussian",
    variant: str = "op2",
    k: int | None = 100,
    folds: int = 3,
    runs: int = 3,
    rough: bool = False,
    seed: int = 0,
    epsilon: float = 1e-4,
    delta_stop: float = 1e-6,
    max_columns: int = 200,
    negative_init: bool = False,
) -> tuple[float, float | None, list[dict]]:
    """Cross-validated grid search over (nu, sigma2).

    Scores each cell by the mean held-out fold accuracy over ``runs``
    reshuffles of ``folds`` stratified folds.  Folds whose training side
    has a single class are skipped with a warning.  Ties prefer smaller
    nu, then larger sigma2.  Pools are shared across the grid within a
    fold and Gram matrices across nu values, so the sweep costs little
    more than one training run per (fold, sigma2).

    Returns ``(best_nu, best_sigma2, table)``.
    """
    if not nu_grid or not sigma2_grid:
        raise DataError("empty tuning grid")
    labels = np.asarray(labels)
    classes = np.unique(labels)
    binary = classes.size == 2
    accs: dict[tuple[float, float | None], list[float]] = {
        (nu, s2): [] for nu in nu_grid for s2 in sigma2_grid
    }
    for run in range(runs):
        rng = np.random.default_rng([seed, run])
        for fold, val_idx in enumerate(stratified_folds(labels, folds, rng)):
            if val_idx.size == 0:
                warnings.warn(f"run {run} fold {fold}: empty validation fold, skipped")
                continue
            train_mask = np.ones(labels.size, dtype=bool)
            train_mask[val_idx] = False
            train_idx = np.flatnonzero(train_mask)
            y_tr = labels[train_idx]
            if np.unique(y_tr).size < 2:
                warnings.warn(
                    f"run {run} fold {fold}: single-class training fold, skipped"
                )
                continue
            bags_tr = [bags[i] for i in train_idx]
            bags_val = [bags[i] for i in val_idx]
            y_val = labels[val_idx]
            fold_seed = seed + 7907 * run + 7919 * fold
            targets = [None] if binary else list(classes)
            pools_by_target = {}
            for target in targets:
                y_signed = y_tr if binary else np.where(y_tr == target, 1, -1)
                pools_by_target[target] = (
                    y_signed,
                    prepare_pools(
                        LabeledSample(bags_tr, y_signed), lengths, k, seed=fold_seed
                    ),
                )
            for s2 in sigma2_grid:
                spec = KernelSpec(kernel, s2 if kernel == "gaussian" else None)
                grams_by_target = {
                    t: prepare_grams(spec, pools)
                    for t, (_, pools) in pools_by_target.items()
                }
                for nu in nu_grid:
                    val_scores = []
                    for target in targets:
                        y_signed, _ = pools_by_target[target]
                        try:
                            model, _, _ = train_signed(
                                bags_tr,
                                y_signed,
                                lengths=lengths,
                                nu=nu,
                                kernel=kernel,
                                sigma2=s2 if s2 is not None else 1.0,
                                variant=variant,
                                epsilon=epsilon,
                                delta_stop=delta_stop,
                                max_columns=max_columns,
                                negative_init=negative_init,
                                rough=rough,
                                seed=fold_seed,
                                grams=grams_by_target[target],
                            )
                        except SolverError as exc:
                            # A cell whose training fails cannot classify;
                            # score it pessimally instead of aborting the
                            # whole sweep.
                            warnings.warn(
                                f"run {run} fold {fold} nu={nu} sigma2={s2}: "
                                f"training failed ({exc}); cell scored 0"
                            )
                            val_scores = None
                            break
                        val_scores.append(score_bags(model, bags_val))
                    if val_scores is None:
                        accs[(nu, s2)].append(0.0)
                        continue
                    if binary:
                        preds = np.where(val_scores[0] >= 0.0, 1, -1)
                    else:
                        preds = classes[np.argmax(np.column_stack(val_scores), axis=1)]
                    accs[(nu, s2)].append(float(np.mean(preds == y_val)))
    table = []
    for (nu, s2), values in accs.items():
        mean = float(np.mean(values)) if values else float("nan")
        table.append(
            {"nu": nu, "sigma2": s2, "cv_accuracy": mean, "folds_scored": len(values)}
        )
    scored = [row for row in table if row["folds_scored"] > 0]
    if not scored:
        raise DataError("every cross-validation fold was skipped")
    best = max(
        scored,
        key=lambda r: (
            r["cv_accuracy"],
            -r["nu"],
            r["sigma2"] if r["sigma2"] is not None else 0.0,
        ),
    )
    table.sort(key=lambda r: (r["nu"], r["sigma2"] if r["sigma2"] is not None else 0.0))
    return best["nu"], best["sigma2"], table


# ---------------------------------------------------------------------------
# training shared by cmd_train / cmd_tune


def _train_and_save(
    args,
    bags: list[Bag],
    labels: np.ndarray,
    lengths: tuple[int, ...],
    nu: float,
    sigma2: float | None,
) -> dict:
    classes = np.unique(labels)
    if classes.size < 2:
        raise DataError("training requires at least two classes")
    extra_meta = {"task": args.task, "znorm": bool(getattr(args, "znorm", False))}
    params = dict(
        lengths=lengths,
        nu=nu,
        kernel=args.kernel,
        sigma2=sigma2 if sigma2 is not None else 1.0,
        variant=args.variant,
        k=args.k if args.k > 0 else None,
        kmeans_iterations=args.kmeans_iterations,
        kmeans_restarts=args.kmeans_restarts,
        epsilon=args.epsilon,
        delta_stop=args.delta_stop,
        max_columns=args.max_columns,
        negative_init=args.negative_init,
        restarts=args.restarts,
        seed=args.seed,
    )

    def finalize(model: BoostModel) -> BoostModel:
        meta = dict(model.meta)
        meta.update(extra_meta)
        return BoostModel(kernel=model.kernel, nu=model.nu, terms=model.terms, meta=meta)

    if classes.size == 2:
        model, diag, accuracy = train_signed(bags, labels, **params)
        model = finalize(model)
        save_model(model, args.out)
        models = [model]
        total_columns = diag.n_columns
    else:
        models = []
        total_columns = 0
        scores = np.empty((len(bags), classes.size))
        for col, label in enumerate(classes):
            signed = np.where(labels == label, 1, -1)
            model, diag, _ = train_signed(bags, signed, **params)
            models.append(finalize(model))
            total_columns += diag.n_columns
            scores[:, col] = score_bags(models[-1], bags)
        accuracy = float(np.mean(classes[np.argmax(scores, axis=1)] == labels))
        _save_container(
            Path(args.out),
            classes,
            models,
            {"classes": [int(c) for c in classes], **extra_meta},
        )
    nonzeros = sum(len(t.coefficients) for m in models for t in m.terms)
    return {
        "task": args.task,
        "classes": [int(c) for c in classes],
        "training_accuracy": accuracy,
        "columns": total_columns,
        "nonzero_coefficients": nonzeros,
        "model": args.out,
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    start = time.perf_counter()
    bags, labels, lengths = _load_dataset(args.task, args.data, args.lengths, args.znorm)
    nu = _single_float(args.nu, "--nu") if args.nu else 0.2
    sigma2 = (
        _single_float(args.sigma2, "--sigma2")
        if args.sigma2
        else (1.0 if args.kernel == "gaussian" else None)
    )
    summary = _train_and_save(args, bags, labels, lengths, nu, sigma2)
    summary["nu"] = nu
    if args.kernel == "gaussian":
        summary["sigma2"] = sigma2
    summary["wall_time_seconds"] = round(time.perf_counter() - start, 3)
    print(json.dumps(summary))
    return 0


def cmd_tune(args) -> int:
    start = time.perf_counter()
    bags, labels, lengths = _load_dataset(args.task, args.data, args.lengths, args.znorm)
    if args.nu:
        nu_grid = _parse_number_list(args.nu)
    else:
        nu_grid = list(SL_NU_GRID if args.task == "timeseries" else MIL_NU_GRID)
    if args.kernel != "gaussian":
        sigma2_grid: list[float | None] = [None]
    elif args.sigma2:
        sigma2_grid = list(_parse_number_list(args.sigma2))
    elif args.task == "timeseries":
        sigma2_grid = [1.0 / q for q in SL_INV_SIGMA2_GRID]
    else:
        sigma2_grid = list(MIL_SIGMA2_GRID)
    folds = args.folds if args.folds else (3 if args.task == "timeseries" else 5)
    runs = args.runs if args.runs else (3 if args.task == "timeseries" else 1)
    best_nu, best_sigma2, table = tune_grid(
        bags,
        labels,
        lengths,
        nu_grid,
        sigma2_grid,
        kernel=args.kernel,
        variant=args.variant,
        k=args.k if args.k > 0 else None,
        folds=folds,
        runs=runs,
        rough=args.rough_tune,
        seed=args.seed,
        epsilon=args.epsilon,
        delta_stop=args.delta_stop,
        max_columns=args.max_columns,
        negative_init=args.negative_init,
    )
    summary = _train_and_save(args, bags, labels, lengths, best_nu, best_sigma2)
    summary.update(
        {
            "nu": best_nu,
            "sigma2": best_sigma2,
            "cv_table": table,
            "folds": folds,
            "runs": runs,
            "rough_tune": bool(args.rough_tune),
            "wall_time_seconds": round(time.perf_counter() - start, 3),
        }
    )
    print(json.dumps(summary))
    return 0


def _load_for_model(args) -> tuple[list[int] | None, list[BoostModel], list[Bag], np.ndarray]:
    classes, models = _load_models(args.model)
    task, znorm = _model_task(models, args.task)
    meta_lengths = models[0].meta.get("lengths")
    lengths_arg = (
        ",".join(str(int(l)) for l in meta_lengths)
        if task == "timeseries" and meta_lengths
        else args.lengths
    )
    bags, labels, _ = _load_dataset(task, args.data, lengths_arg, znorm)
    return classes, models, bags, labels


def cmd_predict(args) -> int:
    classes, models, bags, _ = _load_for_model(args)
    scores, labels = _scores_and_labels(classes, models, bags)
    lines = ["index,score,label"]
    lines += [
        f"{i},{repr(float(s))},{int(lab)}" for i, (s, lab) in enumerate(zip(scores, labels))
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    classes, models, bags, truth = _load_for_model(args)
    scores, predicted = _scores_and_labels(classes, models, bags)
    metrics: dict = {
        "n_bags": len(bags),
        "accuracy": float(np.mean(predicted == truth)),
    }
    if classes is None:
        rhos = _parse_number_list(args.rho) if args.rho else [0.0]
        sample = LabeledSample(bags, truth)
        metrics["margin_loss"] = {
            repr(float(r)): margin_loss(models[0], sample, r) for r in rhos
        }
    text = json.dumps(metrics)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_explain(args) -> int:
    classes, models, bags, _ = _load_for_model(args)
    if classes is not None:
        raise DataError(
            "explain needs a single binary model file; pass one per-class "
            "model from the container directory"
        )
    model = models[0]
    with open(args.out, "w", encoding="utf-8") as fh:
        for index, bag in enumerate(bags):
            attributions = explain(model, bag)
            score = sum(a.contribution for a in attributions)
            record = {
                "bag_index": index,
                "score": score,
                "label": 1 if score >= 0.0 else -1,
                "terms": [
                    {
                        "weight": a.weight,
                        "length": a.length,
                        "window_start": a.window_start,
                        "contribution": a.contribution,
                    }
                    for a in attributions
                ],
            }
            fh.write(json.dumps(record) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapeboost",
        description="Shapelet-based multiple-instance boosting classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("data", help="input dataset (CSV for timeseries, JSONL for mil)")
        p.add_argument("--task", choices=("timeseries", "mil"), default="timeseries")
        p.add_argument("--lengths", help="comma list; fractions of L or absolute ints")
        p.add_argument("--znorm", action="store_true", help="z-normalize each window")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--verbose", action="store_true")

    def training(p: argparse.ArgumentParser) -> None:
        p.add_argument("--nu", help="soft-margin parameter (comma list when tuning)")
        p.add_argument("--sigma2", help="Gaussian bandwidth (comma list when tuning)")
        p.add_argument("--kernel", choices=("gaussian", "linear"), default="gaussian")
        p.add_argument("--variant", choices=("op1", "op2"), default="op2")
        p.add_argument("--k", type=int, default=100, help="k-means budget per class; 0 disables")
        p.add_argument("--kmeans-iterations", type=int, default=100)
        p.add_argument("--kmeans-restarts", type=int, default=1)
        p.add_argument("--epsilon", type=float, default=1e-4, help="weak-learner stop gap")
        p.add_argument("--delta-stop", type=float, default=1e-6, help="boosting stop slack")
        p.add_argument("--max-columns", type=int, default=200)
        p.add_argument("--negative-init", action="store_true")
        p.add_argument("--restarts", type=int, default=1)
        p.add_argument("--out", required=True, help="model file (directory for >2 classes)")

    p_train = sub.add_parser("train", help="fit a model at fixed hyperparameters")
    common(p_train)
    training(p_train)
    p_train.set_defaults(func=cmd_train)

    p_tune = sub.add_parser("tune", help="cross-validated grid search, then retrain")
    common(p_tune)
    training(p_tune)
    p_tune.add_argument("--folds", type=int, default=0, help="CV folds (default 3 SL / 5 MIL)")
    p_tune.add_argument("--runs", type=int, default=0, help="CV repetitions (default 3 SL / 1 MIL)")
    p_tune.add_argument(
        "--rough-tune",
        action="store_true",
        help="search with the init-only weak learner, retrain full",
    )
    p_tune.set_defaults(func=cmd_tune)

    for name, func, help_text in (
        ("predict", cmd_predict, "write index,score,label CSV"),
        ("eval", cmd_eval, "accuracy and margin-loss metrics"),
        ("explain", cmd_explain, "per-bag, per-term attribution JSONL"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--model", required=True)
        if name == "eval":
            p.add_argument("--rho", help="comma list of margin thresholds (default 0)")
            p.add_argument("--out")
        else:
            p.add_argument("--out", required=name == "explain")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
