"""Command-line interface: train, importance, simulate."""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .data import (
    DataError, Dataset, DummyGroupMap, dummy_encode, fold_importances,
    inject_random_feature, load_csv, parse_schema,
)
from .forest import Forest, ForestConfig, fit
from .importance import permutation_importance, si_forest, ufi_forest
from .simgen import SimSetting, run_experiment, summary_json, tidy_csv
from .tree import TreeConfig

EXIT_DATA_ERROR = 1
EXIT_USAGE_ERROR = 2


def _die_data(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_DATA_ERROR)


def _die_usage(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_USAGE_ERROR)


def _fingerprint(path: str, d: Dataset) -> dict:
    h = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return {"path": os.path.basename(path), "rows": d.n, "cols": d.p, "sha256": h}


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int,
                    fingerprint: dict | None, started: float,
                    extra: dict | None = None):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "dataset": fingerprint,
        "duration_s": round(time.time() - started, 3),
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _parse_max_features(value: str | None):
    if value is None:
        return None
    if value in ("all", "sqrt"):
        return value
    try:
        if "." in value:
            return float(value)
        return int(value)
    except ValueError:
        _die_usage(f"bad --max-features value {value!r}")


def _load_dataset(data_path, schema_path, task):
    try:
        schema = json.loads(Path(schema_path).read_text())
        target, schema_task, kinds = parse_schema(schema)
    except (OSError, json.JSONDecodeError, DataError) as e:
        _die_usage(f"bad schema: {e}")
    task = task or schema_task
    if task not in ("classification", "regression"):
        _die_usage("--task (or schema 'task') must be classification or regression")
    try:
        d = load_csv(data_path, target, task, kinds)
    except DataError as e:
        _die_data(str(e))
    except OSError as e:
        _die_data(str(e))
    return d


def _forest_config(trees, max_depth, max_features, min_samples_leaf,
                   bootstrap, seed, task):
    criterion = "gini" if task == "classification" else "mse"
    return ForestConfig(
        n_trees=trees,
        tree=TreeConfig(criterion=criterion, max_depth=max_depth,
                        min_samples_leaf=min_samples_leaf),
        bootstrap=bootstrap,
        seed=seed,
        max_features=_parse_max_features(max_features),
    )


def _resolve_seed(seed: int | None) -> int:
    # absent --seed draws a seed so the manifest can still pin the run
    return int.from_bytes(os.urandom(4), "big") if seed is None else seed


def _threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    return max(1, int(os.environ.get("UFI_THREADS", "1")))


def _model_payload(forest: Forest, gmap: DummyGroupMap | None,
                   dataset: Dataset) -> dict:
    payload = forest.to_dict()
    payload["dummy_groups"] = None if gmap is None else gmap.to_dict()
    payload["class_labels"] = dataset.class_labels
    return payload


def _save_model(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True) + "\n")


def _load_model(path: str):
    try:
        payload = json.loads(Path(path).read_text())
        forest = Forest.from_dict(payload)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        _die_data(f"cannot load model {path}: {e}")
    gmap = payload.get("dummy_groups")
    return forest, None if gmap is None else DummyGroupMap.from_dict(gmap)


@click.group()
@click.version_option(__version__)
def main():
    """Random forests with debiased split-improvement feature importance."""


forest_flags = [
    click.option("--trees", type=int, default=100, show_default=True),
    click.option("--max-depth", type=int, default=None),
    click.option("--max-features", type=str, default=None,
                 help="all | sqrt | count | fraction (default: sqrt for "
                      "classification, all for regression)"),
    click.option("--min-samples-leaf", type=int, default=1, show_default=True),
    click.option("--bootstrap/--no-bootstrap", default=True, show_default=True),
    click.option("--seed", type=int, default=None),
    click.option("--threads", type=int, default=None,
                 help="worker threads (default: env UFI_THREADS or 1)"),
]


def with_forest_flags(f):
    for flag in reversed(forest_flags):
        f = flag(f)
    return f


@main.command("train")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--task", type=click.Choice(["classification", "regression"]),
              default=None)
@click.option("--out", type=click.Path(file_okay=False), default="ufitree_model")
@with_forest_flags
def cmd_train(data, schema, task, out, trees, max_depth, max_features,
              min_samples_leaf, bootstrap, seed, threads):
    """Fit a forest on a CSV and write the model plus a run manifest."""
    started = time.time()
    seed = _resolve_seed(seed)
    d = _load_dataset(data, schema, task)
    enc, gmap = (dummy_encode(d) if any(k.is_categorical for k in d.kinds)
                 else (d, None))
    config = _forest_config(trees, max_depth, max_features, min_samples_leaf,
                            bootstrap, seed, enc.task)
    forest = fit(enc, config, n_jobs=_threads(threads))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _save_model(out_dir / "model.json", _model_payload(forest, gmap, d))
    _write_manifest(out_dir, "train", config.to_dict(), seed,
                    _fingerprint(data, d), started,
                    extra={"class_labels": d.class_labels})
    click.echo(f"model written to {out_dir / 'model.json'}")


@main.command("importance")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False),
              help="training CSV (used to fit, and for OOB evaluation)")
@click.option("--schema", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--task", type=click.Choice(["classification", "regression"]),
              default=None)
@click.option("--method", type=click.Choice(["si", "ufi", "permutation"]),
              required=True)
@click.option("--test", "test_source", type=str, default="oob", show_default=True,
              help="'oob' or a path to a test CSV with the same schema")
@click.option("--fold-dummies/--no-fold-dummies", default=True, show_default=True)
@click.option("--inject-random", is_flag=True, default=False,
              help="append an independent standard-normal probe column")
@click.option("--out", type=click.Path(file_okay=False), default="ufitree_importance")
@with_forest_flags
def cmd_importance(data, schema, task, method, test_source, fold_dummies,
                   inject_random, out, trees, max_depth, max_features,
                   min_samples_leaf, bootstrap, seed, threads):
    """Train a forest and score features with one importance method."""
    started = time.time()
    seed = _resolve_seed(seed)
    d = _load_dataset(data, schema, task)
    if inject_random:
        d = inject_random_feature(d, seed=seed + 1)
    enc, gmap = (dummy_encode(d) if any(k.is_categorical for k in d.kinds)
                 else (d, None))
    if method in ("ufi", "permutation") and test_source == "oob" and not bootstrap:
        _die_usage(f"--method {method} --test oob requires --bootstrap")
    config = _forest_config(trees, max_depth, max_features, min_samples_leaf,
                            bootstrap, seed, enc.task)
    forest = fit(enc, config, n_jobs=_threads(threads))

    if test_source != "oob":
        dt = _load_dataset(test_source, schema, enc.task)
        if inject_random:
            dt = inject_random_feature(dt, seed=seed + 2)
        enc_t, _ = (dummy_encode(dt) if any(k.is_categorical for k in dt.kinds)
                    else (dt, None))
        if enc_t.p != enc.p:
            _die_data("test file encodes to a different column count than training")
        xt, yt = enc_t.X, enc_t.y
    else:
        xt = yt = None

    if method == "si":
        report = si_forest(forest)
    elif method == "ufi":
        if test_source == "oob":
            report = ufi_forest(forest, enc.X, enc.y, test="oob")
        else:
            report = ufi_forest(forest, enc.X, enc.y, test="explicit",
                                X_test=xt, y_test=yt)
    else:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
        if test_source == "oob":
            report = permutation_importance(forest, enc.X, enc.y,
                                            mode="oob_per_tree", rng=rng)
        else:
            report = permutation_importance(forest, enc.X, enc.y, mode="test_set",
                                            rng=rng, X_test=xt, y_test=yt)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scores_encoded.csv").write_text(report.to_csv())
    (out_dir / "scores_encoded.json").write_text(report.to_json() + "\n")
    if fold_dummies and gmap is not None:
        names, folded = fold_importances(report.scores, gmap)
        lines = ["feature,score"]
        lines += [f"{n},{float(s)!r}" for n, s in zip(names, folded)]
        (out_dir / "scores.csv").write_text("\n".join(lines) + "\n")
        (out_dir / "scores.json").write_text(json.dumps({
            "method": method,
            "feature_names": names,
            "scores": [float(s) for s in folded],
            "skipped_nodes": report.skipped_nodes,
            "n_trees": report.n_trees,
        }, indent=2) + "\n")
    else:
        (out_dir / "scores.csv").write_text(report.to_csv())
        (out_dir / "scores.json").write_text(report.to_json() + "\n")
    _write_manifest(out_dir, "importance", {
        **_forest_config(trees, max_depth, max_features, min_samples_leaf,
                         bootstrap, seed, enc.task).to_dict(),
        "method": method,
        "test": test_source,
        "fold_dummies": fold_dummies,
        "inject_random": inject_random,
    }, seed, _fingerprint(data, d), started)
    click.echo(f"reports written to {out_dir}")


@main.command("simulate")
@click.option("--scenario", type=click.Choice(["null-mixed", "signal", "discrete10"]),
              required=True)
@click.option("--task", type=click.Choice(["classification", "regression"]),
              required=True)
@click.option("--rho", type=float, default=0.0, show_default=True)
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--encoding", type=click.Choice(["dummy", "ordinal"]),
              default="dummy", show_default=True)
@click.option("--methods", type=str, default="si,ufi", show_default=True,
              help="comma-separated subset of si,ufi,permutation")
@click.option("--out", type=click.Path(file_okay=False), default="ufitree_sim")
@with_forest_flags
def cmd_simulate(scenario, task, rho, n, reps, encoding, methods, out, trees,
                 max_depth, max_features, min_samples_leaf, bootstrap, seed,
                 threads):
    """Run a synthetic benchmark and emit tidy scores plus a summary."""
    started = time.time()
    seed = _resolve_seed(seed)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    for m in method_list:
        if m not in ("si", "ufi", "permutation"):
            _die_usage(f"unknown method {m!r}")
    setting = SimSetting(scenario=scenario.replace("-", "_"), task=task, rho=rho,
                         encoding=encoding, n=n, reps=reps, seed=seed)
    try:
        setting.validate()
    except ValueError as e:
        _die_usage(str(e))
    config = _forest_config(trees, max_depth, max_features, min_samples_leaf,
                            bootstrap, seed, task)
    results = run_experiment(setting, config, method_list,
                             n_jobs=_threads(threads))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scores.csv").write_text(tidy_csv(results))
    (out_dir / "summary.json").write_text(summary_json(results) + "\n")
    _write_manifest(out_dir, "simulate", {
        **config.to_dict(),
        "scenario": setting.scenario, "task": task, "rho": rho, "n": n,
        "reps": reps, "encoding": encoding, "methods": method_list,
    }, seed, None, started)
    click.echo(f"results written to {out_dir}")


if __name__ == "__main__":
    main()
