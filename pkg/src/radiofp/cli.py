"""Command-line entry point for reproducible runs.

Subcommands: generate, features, train, evaluate, ablate, importance, dtw.
Every command reads an optional flat ``key = value`` config file, lets
command-line flags override it, writes its outputs under ``--out`` and
drops a ``manifest.json`` echoing the fully resolved configuration. Given
the same config and seed, outputs are byte-identical across runs and
across ``--jobs`` settings.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import convnet, kernel_svm, linear_svm, random_forest, synthgen
from .domain import FineClass, load_dataset, save_dataset
from .evaluation import (
    apply_scaler_for,
    cross_validate,
    dataset_labels,
    featurize,
    fit_scaler_for,
    importance_report,
    link_ablation,
    write_ablation_csv,
    write_confusion_csv,
    write_report_json,
)
from .features import feature_matrix, raw_feature_names, reduced_feature_names
from .pipelines import ALL_LINKS, MODEL_NAMES, NetModel, make_pipeline
from .timewarp import similarity, standardized_dtw_matrix

DEFAULT_SUBSETS = "1;5;9;1,5,9;3,7;1,2,3,4,5,6,7,8,9"


class UsageError(ValueError):
    """Bad flags or config; maps to exit code 2."""


def _auto_value(text: str):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _read_flat_config(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


def _parse_links(text) -> tuple:
    if isinstance(text, tuple):
        return text
    try:
        return tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise UsageError(f"bad link list {text!r}; expected e.g. 1,5,9") from None


def _parse_subsets(text) -> list:
    subsets = []
    for chunk in str(text).split(";"):
        chunk = chunk.strip()
        if chunk:
            subsets.append(_parse_links(chunk))
    if not subsets:
        raise UsageError("no link subsets given")
    return subsets


def resolve_run_config(args) -> dict:
    """Merge config-file keys with flags; flags win."""
    config = {
        "model": "rbf_svm",
        "features": None,
        "links": ALL_LINKS,
        "task": "coarse",
        "k": 10,
        "seed": None,  # None: generate falls back to the generator config's seed
        "jobs": 1,
        "stratified": True,
        "dataset": None,
        "out": "runs/out",
        "link": 1,
        "subsets": DEFAULT_SUBSETS,
        "hyper": {},
    }
    if getattr(args, "config", None):
        for key, value in _read_flat_config(args.config).items():
            if key.startswith("hyper."):
                name = key[len("hyper.") :]
                config["hyper"][name] = (
                    _auto_value(value) if name != "fc_widths" else _parse_links(value)
                )
            elif key == "links":
                config["links"] = _parse_links(value)
            elif key in config:
                config[key] = _auto_value(value)
            else:
                raise UsageError(f"unknown config key {key!r}")
    for key in ("model", "features", "task", "k", "seed", "jobs", "dataset", "out", "link"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    if getattr(args, "links", None):
        config["links"] = _parse_links(args.links)
    if getattr(args, "subsets", None):
        config["subsets"] = args.subsets
    if config["model"] not in MODEL_NAMES:
        raise UsageError(f"unknown model {config['model']!r}; choose from {MODEL_NAMES}")
    if config["task"] not in ("fine", "coarse"):
        raise UsageError(f"unknown task {config['task']!r}")
    return config


def _out_dir(config) -> Path:
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(config) -> int:
    return 0 if config["seed"] is None else int(config["seed"])


def _write_manifest(out: Path, command: str, config: dict) -> None:
    manifest = {"command": command, **config}
    manifest["links"] = list(manifest["links"])
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)


def _require_dataset(config):
    path = config.get("dataset")
    if not path:
        raise UsageError("--dataset is required for this command")
    if not Path(path).exists():
        raise UsageError(f"dataset file not found: {path}")
    return load_dataset(path)


def cmd_generate(config) -> None:
    out = _out_dir(config)
    if config.get("gen_config"):
        gen_config, counts = synthgen.load_generator_config(config["gen_config"])
    else:
        gen_config, counts = synthgen.GeneratorConfig(), {}
    if config.get("seed") is not None:
        gen_config = replace(gen_config, seed=int(config["seed"]))
    if not counts:
        counts = {c: 10 for c in FineClass}
    dataset = synthgen.generate(gen_config, counts, sidecar_path=out / "sidecar.jsonl")
    save_dataset(dataset, out / "dataset.jsonl")
    _write_manifest(out, "generate", {**config, "counts": {c.canonical_name: n for c, n in counts.items()}})
    print(f"wrote {len(dataset)} records to {out / 'dataset.jsonl'}")
    for cls, n in dataset.counts_by_class().items():
        if n:
            print(f"  {cls.canonical_name}: {n}")


def cmd_features(config) -> None:
    dataset = _require_dataset(config)
    kind = config["features"] or "reduced"
    if kind not in ("raw", "reduced"):
        raise UsageError("features export supports kinds 'raw' and 'reduced'")
    links = config["links"]
    X = feature_matrix(dataset, kind, links)
    names = raw_feature_names(links) if kind == "raw" else reduced_feature_names(links)
    out = _out_dir(config)
    with open(out / "features.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "fine_class"] + names)
        for rec, row in zip(dataset, X):
            writer.writerow([rec.id, rec.fine.canonical_name] + [repr(float(v)) for v in row])
    _write_manifest(out, "features", config)
    print(f"wrote {X.shape[0]} x {X.shape[1]} feature matrix to {out / 'features.csv'}")


def _build_pipeline(config):
    return make_pipeline(
        config["model"],
        task=config["task"],
        features=config["features"],
        links=config["links"],
        hyper=config["hyper"],
    )


def cmd_train(config) -> None:
    dataset = _require_dataset(config)
    pipeline = _build_pipeline(config)

    X = featurize(dataset, pipeline.feature_kind, pipeline.links)
    labels = dataset_labels(dataset, pipeline.task)
    out = _out_dir(config)
    if pipeline.standardize:
        scaler = fit_scaler_for(pipeline.feature_kind, X)
        X = apply_scaler_for(pipeline.feature_kind, scaler, X)
        if pipeline.feature_kind == "tensor":
            scaler_obj = {"mean": scaler[0].tolist(), "std": scaler[1].tolist()}
        else:
            scaler_obj = {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()}
        with open(out / "scaler.json", "w", encoding="utf-8") as fh:
            json.dump(scaler_obj, fh)
    model = pipeline.fit(X, labels, _seed(config))
    if isinstance(model, linear_svm.LinearModel):
        linear_svm.save_linear_model(model, out / "model.json")
    elif isinstance(model, kernel_svm.RbfModel):
        kernel_svm.save_rbf_model(model, out / "model.json")
    elif isinstance(model, random_forest.Forest):
        random_forest.save_forest(model, out / "model.json")
    elif isinstance(model, NetModel):
        convnet.save_params(model.params, model.spec, out / "model.npz")
        with open(out / "training_log.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "train_acc"])
            for row in model.history:
                writer.writerow([row["epoch"], repr(row["loss"]), repr(row["train_acc"])])
    else:  # pragma: no cover - registry and save stanzas move together
        raise RuntimeError(f"no serializer for model type {type(model)!r}")
    train_preds = pipeline.predict(model, X)
    train_acc = float((train_preds == labels).mean())
    _write_manifest(out, "train", config)
    print(f"trained {pipeline.name} on {len(dataset)} records; training accuracy {train_acc:.4f}")


def cmd_evaluate(config) -> None:
    dataset = _require_dataset(config)
    pipeline = _build_pipeline(config)
    report = cross_validate(
        pipeline,
        dataset,
        k=int(config["k"]),
        seed=_seed(config),
        stratified=bool(config["stratified"]),
        jobs=int(config["jobs"]),
    )
    out = _out_dir(config)
    write_report_json(report, out / "report.json")
    write_confusion_csv(report.confusion, out / "confusion.csv")
    write_confusion_csv(report.confusion, out / "confusion_normalized.csv", normalized=True)
    if report.confusion_coarse is not None:
        write_confusion_csv(report.confusion_coarse, out / "confusion_coarse.csv")
    _write_manifest(out, "evaluate", config)
    print(
        f"{pipeline.name} {config['task']} ACC_{config['k']} = {report.acc_k:.4f}"
        f" (sigma {report.sigma_acc:.4f})"
    )


def cmd_ablate(config) -> None:
    dataset = _require_dataset(config)
    subsets = _parse_subsets(config["subsets"])

    def factory(links):
        return make_pipeline(
            config["model"],
            task=config["task"],
            features="raw",
            links=links,
            hyper=config["hyper"],
        )

    rows = link_ablation(
        factory,
        dataset,
        subsets,
        k=int(config["k"]),
        seed=_seed(config),
        stratified=bool(config["stratified"]),
        jobs=int(config["jobs"]),
    )
    out = _out_dir(config)
    write_ablation_csv(rows, out / "ablation.csv")
    _write_manifest(out, "ablate", config)
    for row in rows:
        links_text = "+".join(str(l) for l in row["links"])
        print(f"links {links_text}: ACC = {row['acc_k']:.4f} (dim {row['dim']})")


def cmd_importance(config) -> None:
    dataset = _require_dataset(config)
    pipeline = make_pipeline(
        "l1l2_svm",
        task=config["task"],
        features="raw",
        links=config["links"],
        hyper=config["hyper"],
    )

    X = featurize(dataset, "raw", pipeline.links)
    labels = dataset_labels(dataset, pipeline.task)
    if pipeline.standardize:
        scaler = fit_scaler_for("raw", X)
        X = apply_scaler_for("raw", scaler, X)
    model = pipeline.fit(X, labels, _seed(config))
    table = importance_report(model)
    out = _out_dir(config)
    with open(out / "importance.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class\\link"] + [f"phi{l}" for l in pipeline.links])
        for cls, row in zip(model.classes, table):
            writer.writerow([cls.canonical_name] + [repr(float(v)) for v in row])
    _write_manifest(out, "importance", config)
    print(f"wrote {table.shape[0]} x {table.shape[1]} importance table to {out / 'importance.csv'}")


def cmd_dtw(config) -> None:
    dataset = _require_dataset(config).sorted_by_class()
    link = int(config["link"])
    matrix = standardized_dtw_matrix(dataset, link, jobs=int(config["jobs"]))
    sim = similarity(matrix, ids=[rec.id for rec in dataset])
    out = _out_dir(config)
    path = out / f"similarity_link{link}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + list(sim.ids))
        for rec_id, row in zip(sim.ids, sim.values):
            writer.writerow([rec_id] + [repr(float(v)) for v in row])
    _write_manifest(out, "dtw", config)
    print(f"wrote {len(dataset)} x {len(dataset)} similarity matrix to {path}")


HANDLERS = {
    "generate": cmd_generate,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "importance": cmd_importance,
    "dtw": cmd_dtw,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radiofp",
        description="Vehicle classification from multi-link RSSI fingerprints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value run config file")
        p.add_argument("--dataset", help="JSONL dataset path")
        p.add_argument("--model", choices=MODEL_NAMES)
        p.add_argument("--features", choices=("raw", "reduced", "tensor"))
        p.add_argument("--links", help="comma-separated link numbers, e.g. 1,5,9")
        p.add_argument("--task", choices=("fine", "coarse"))
        p.add_argument("--k", type=int, help="number of cross-validation folds")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker threads (results identical for any value)")
        p.add_argument("--out", help="output directory (created if missing)")
        return p

    gen = add_common(sub.add_parser("generate", help="write a synthetic dataset"))
    gen.add_argument("--gen-config", dest="gen_config", help="generator config file")
    add_common(sub.add_parser("features", help="export a feature matrix as CSV"))
    add_common(sub.add_parser("train", help="train one model on the whole dataset"))
    add_common(sub.add_parser("evaluate", help="k-fold cross-validated evaluation"))
    abl = add_common(sub.add_parser("ablate", help="accuracy per link subset"))
    abl.add_argument("--subsets", help="semicolon-separated link subsets, e.g. '1;1,5,9'")
    add_common(sub.add_parser("importance", help="per-class per-link weight counts"))
    dtw_p = add_common(sub.add_parser("dtw", help="standardized DTW similarity matrix"))
    dtw_p.add_argument("--link", type=int, help="link number 1..9")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_run_config(args)
        if args.command == "generate":
            config["gen_config"] = getattr(args, "gen_config", None)
        HANDLERS[args.command](config)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
