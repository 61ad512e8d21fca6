"""Cross-validated accuracy, confusion matrices, ablations and importance.

The k-fold estimator reports the mean fold accuracy ACC_k together with
its population-form standard deviation sqrt(mean(ACC_i^2) - ACC_k^2).
Preprocessing (feature scaling) is fitted on the training folds only, so
no test information leaks into the model.
"""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .convnet import apply_link_scaler, fit_link_scaler
from .domain import CoarseClass, Dataset, FineClass, coarse_of
from .features import feature_matrix, standardize_apply, standardize_fit
from .linear_svm import LinearModel, nonzero_counts


def accuracy(predictions, labels) -> float:
    """Fraction of exact matches between two equal-length label lists."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError("predictions and labels must be equal-length and nonempty")
    return float((predictions == labels).mean())


@dataclass(frozen=True)
class FoldSplit:
    """Disjoint cover of record indices by k nonempty folds."""

    folds: tuple

    def __post_init__(self):
        seen = set()
        for fold in self.folds:
            if len(fold) == 0:
                raise ValueError("empty fold")
            for i in fold:
                if int(i) in seen:
                    raise ValueError("folds overlap")
                seen.add(int(i))
        if seen != set(range(len(seen))):
            raise ValueError("folds must cover exactly 0..n-1")

    @property
    def k(self) -> int:
        return len(self.folds)


def kfold_split(n: int, labels, k: int, seed: int = 0, stratified: bool = True) -> FoldSplit:
    """Partition 0..n-1 into k folds, optionally stratified by label.

    Stratified mode shuffles each class's indices with the seeded RNG and
    deals them round-robin, continuing the fold pointer across classes so
    per-class fold sizes differ by at most one and no fold stays empty.
    A class with fewer than k members simply lands in that many folds.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of records n={n}")
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(n)
        folds = [np.sort(part) for part in np.array_split(perm, k)]
        return FoldSplit(folds=tuple(folds))
    labels = np.asarray(labels)
    if labels.shape[0] != n:
        raise ValueError("labels length must equal n")
    buckets = [[] for _ in range(k)]
    pointer = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        for i in idx:
            buckets[pointer % k].append(int(i))
            pointer += 1
    return FoldSplit(folds=tuple(np.sort(np.array(b, dtype=np.int64)) for b in buckets))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted, in ``class_order``."""

    counts: np.ndarray
    class_order: tuple  # ordinals

    def __post_init__(self):
        n = len(self.class_order)
        if self.counts.shape != (n, n):
            raise ValueError("counts must be square in the class order")
        if (self.counts < 0).any():
            raise ValueError("counts must be nonnegative")

    def normalized(self) -> np.ndarray:
        """Row-normalized variant; empty rows stay all-zero."""
        sums = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        safe = np.where(sums == 0, 1.0, sums)
        return self.counts / safe

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def trace_accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)


def confusion(predictions, labels, class_order) -> ConfusionMatrix:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    order = tuple(int(c) for c in class_order)
    position = {c: i for i, c in enumerate(order)}
    counts = np.zeros((len(order), len(order)), dtype=np.int64)
    for true, pred in zip(labels, predictions):
        try:
            counts[position[int(true)], position[int(pred)]] += 1
        except KeyError:
            raise ValueError(f"label {true}/{pred} outside class order {order}") from None
    return ConfusionMatrix(counts=counts, class_order=order)


def accuracy_quotient(fine_confusion: ConfusionMatrix) -> dict:
    """Per fine class: fraction of samples whose prediction lands in the
    correct coarse class. Classes with no samples are absent from the
    result rather than reported as 0."""
    if tuple(fine_confusion.class_order) != tuple(c.value for c in FineClass):
        raise ValueError("accuracy_quotient needs the 9-class fine confusion")
    out = {}
    for i, true_cls in enumerate(FineClass):
        row = fine_confusion.counts[i]
        total = row.sum()
        if total == 0:
            continue
        good = sum(
            row[j]
            for j, pred_cls in enumerate(FineClass)
            if coarse_of(pred_cls) is coarse_of(true_cls)
        )
        out[true_cls] = float(good / total)
    return out


@dataclass(frozen=True)
class Pipeline:
    """Everything cross_validate needs to train and apply one model family."""

    name: str
    task: str  # "fine" | "coarse"
    feature_kind: str  # "raw" | "reduced" | "tensor"
    links: tuple
    standardize: bool
    fit: Callable  # (X_train, y_train_ordinals, seed) -> model
    predict: Callable  # (model, X) -> predicted ordinals
    size_metrics: Optional[Callable] = None  # model -> dict


@dataclass
class EvaluationReport:
    acc_k: float
    sigma_acc: float
    fold_accuracies: list
    confusion: ConfusionMatrix
    confusion_coarse: Optional[ConfusionMatrix]
    accuracy_quotients: Optional[dict]
    model_size: dict
    config: dict
    fold_scaler_digests: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "acc_k": self.acc_k,
            "sigma_acc": self.sigma_acc,
            "fold_accuracies": self.fold_accuracies,
            "confusion": {
                "class_order": list(self.confusion.class_order),
                "counts": self.confusion.counts.tolist(),
                "normalized": self.confusion.normalized().tolist(),
            },
            "model_size": self.model_size,
            "config": self.config,
        }
        if self.confusion_coarse is not None:
            out["confusion_coarse"] = {
                "class_order": list(self.confusion_coarse.class_order),
                "counts": self.confusion_coarse.counts.tolist(),
                "normalized": self.confusion_coarse.normalized().tolist(),
                # coarse numbers from a coarse-task run are trained natively;
                # these are derived by mapping fine predictions
                "mode": "mapped_from_fine",
            }
        if self.accuracy_quotients is not None:
            out["accuracy_quotients"] = {
                cls.canonical_name: q for cls, q in self.accuracy_quotients.items()
            }
        return out


def dataset_labels(dataset: Dataset, task: str) -> np.ndarray:
    if task == "fine":
        return dataset.fine_labels()
    if task == "coarse":
        return dataset.coarse_labels()
    raise ValueError(f"unknown task {task!r}")


def featurize(dataset: Dataset, kind: str, links) -> np.ndarray:
    if kind == "tensor":
        rows = [l - 1 for l in links]
        return np.stack([rec.series[rows] for rec in dataset])
    return feature_matrix(dataset, kind, links)


def fit_scaler_for(kind: str, X_train):
    if kind == "tensor":
        return fit_link_scaler(X_train)
    return standardize_fit(X_train)


def apply_scaler_for(kind: str, scaler, X):
    if kind == "tensor":
        return apply_link_scaler(scaler, X)
    return standardize_apply(scaler, X)


def _scaler_digest(kind: str, scaler) -> float:
    mean = scaler[0] if kind == "tensor" else scaler.mean
    return float(np.asarray(mean).mean())


def sigma_from_fold_accuracies(fold_accuracies) -> float:
    """Population-form uncertainty: sqrt(mean(acc^2) - mean(acc)^2)."""
    acc = np.asarray(fold_accuracies, dtype=np.float64)
    return float(np.sqrt(max(0.0, float((acc**2).mean() - acc.mean() ** 2))))


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def cross_validate(
    pipeline: Pipeline,
    dataset: Dataset,
    k: int = 10,
    seed: int = 0,
    stratified: bool = True,
    jobs: int = 1,
    min_class_records: int = 2,
) -> EvaluationReport:
    """k-fold estimate of a pipeline's accuracy on a dataset.

    Each fold's scaler and model see the training folds only. Classes with
    fewer than ``min_class_records`` members are dropped with a warning so
    every training fold can contain all remaining classes. Folds can be
    evaluated in parallel threads; results are assembled in fold order and
    do not depend on ``jobs``.
    """
    labels = dataset_labels(dataset, pipeline.task)
    keep = np.ones(len(dataset), dtype=bool)
    skipped = []
    for cls in np.unique(labels):
        members = labels == cls
        if members.sum() < min_class_records:
            keep &= ~members
            skipped.append(int(cls))
    if skipped:
        warnings.warn(
            f"skipping classes with fewer than {min_class_records} records: {skipped}"
        )
        dataset = dataset.subset(np.flatnonzero(keep))
        labels = dataset_labels(dataset, pipeline.task)
    n = len(dataset)
    if n < k:
        raise ValueError(f"dataset of {n} records cannot be split into {k} folds")

    X = featurize(dataset, pipeline.feature_kind, pipeline.links)
    split = kfold_split(n, labels, k, seed=seed, stratified=stratified)
    all_idx = np.arange(n)

    def run_fold(fold_i):
        test_idx = split.folds[fold_i]
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        train_idx = all_idx[train_mask]
        X_train, X_test = X[train_idx], X[test_idx]
        digest = None
        if pipeline.standardize:
            scaler = fit_scaler_for(pipeline.feature_kind, X_train)
            X_train = apply_scaler_for(pipeline.feature_kind, scaler, X_train)
            X_test = apply_scaler_for(pipeline.feature_kind, scaler, X_test)
            digest = _scaler_digest(pipeline.feature_kind, scaler)
        model = pipeline.fit(X_train, labels[train_idx], _fold_seed(seed, fold_i))
        preds = pipeline.predict(model, X_test)
        fold_conf = confusion(preds, labels[test_idx], class_order=np.unique(labels))
        size = pipeline.size_metrics(model) if pipeline.size_metrics else {}
        return accuracy(preds, labels[test_idx]), fold_conf, digest, size

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_fold, range(k)))
    else:
        results = [run_fold(i) for i in range(k)]

    fold_accs = [r[0] for r in results]
    class_order = tuple(int(c) for c in np.unique(labels))
    counts = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
    for _, fold_conf, _, _ in results:
        counts += fold_conf.counts
    conf = ConfusionMatrix(counts=counts, class_order=class_order)

    confusion_coarse = None
    quotients = None
    if pipeline.task == "fine" and class_order == tuple(c.value for c in FineClass):
        coarse_counts = np.zeros((2, 2), dtype=np.int64)
        for i, true_cls in enumerate(FineClass):
            for j, pred_cls in enumerate(FineClass):
                coarse_counts[
                    coarse_of(true_cls).value - 1, coarse_of(pred_cls).value - 1
                ] += counts[i, j]
        confusion_coarse = ConfusionMatrix(
            counts=coarse_counts, class_order=tuple(c.value for c in CoarseClass)
        )
        quotients = accuracy_quotient(conf)

    sizes = [r[3] for r in results if r[3]]
    model_size = {}
    if sizes:
        for key in sizes[0]:
            values = [s[key] for s in sizes]
            model_size[key] = {
                "per_fold": values,
                "mean": float(np.mean(values)),
            }

    return EvaluationReport(
        acc_k=float(np.mean(fold_accs)),
        sigma_acc=sigma_from_fold_accuracies(fold_accs),
        fold_accuracies=fold_accs,
        confusion=conf,
        confusion_coarse=confusion_coarse,
        accuracy_quotients=quotients,
        model_size=model_size,
        config={
            "model": pipeline.name,
            "task": pipeline.task,
            "features": pipeline.feature_kind,
            "links": list(pipeline.links),
            "standardize": pipeline.standardize,
            "k": k,
            "seed": seed,
            "stratified": stratified,
            "n_records": n,
            "skipped_classes": skipped,
        },
        fold_scaler_digests=[r[2] for r in results],
    )


def link_ablation(
    make_pipeline: Callable,
    dataset: Dataset,
    subsets,
    k: int = 10,
    seed: int = 0,
    stratified: bool = True,
    jobs: int = 1,
) -> list:
    """One cross-validation per link subset; raw feature dimension 800 x |S|."""
    subsets = [tuple(sorted(set(int(l) for l in s))) for s in subsets]
    if not subsets or any(len(s) == 0 for s in subsets):
        raise ValueError("subsets must be nonempty link sets")
    rows = []
    for links in subsets:
        report = cross_validate(
            make_pipeline(links), dataset, k=k, seed=seed, stratified=stratified, jobs=jobs
        )
        rows.append(
            {
                "links": links,
                "dim": 800 * len(links),
                "acc_k": report.acc_k,
                "sigma_acc": report.sigma_acc,
            }
        )
    return rows


def importance_report(model: LinearModel, epsilon: float = 1e-9) -> np.ndarray:
    """Class-by-link table of non-zero weight counts, normalized per link.

    Columns (links) sum to 1; links with no non-zero weights anywhere keep
    an all-zero column.
    """
    if model.reg != "l1":
        raise ValueError("importance_report expects an L1-regularized model")
    counts = nonzero_counts(model, epsilon=epsilon).astype(np.float64)
    col_sums = counts.sum(axis=0, keepdims=True)
    safe = np.where(col_sums == 0, 1.0, col_sums)
    return counts / safe


def write_confusion_csv(conf: ConfusionMatrix, path, normalized: bool = False) -> None:
    table = conf.normalized() if normalized else conf.counts
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + [str(c) for c in conf.class_order])
        for cls, row in zip(conf.class_order, table):
            writer.writerow([str(cls)] + [repr(float(v)) for v in row])


def write_ablation_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["links", "dim", "acc_k", "sigma_acc"])
        for row in rows:
            writer.writerow(
                [
                    "+".join(str(l) for l in row["links"]),
                    row["dim"],
                    repr(row["acc_k"]),
                    repr(row["sigma_acc"]),
                ]
            )


def write_report_json(report: EvaluationReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
