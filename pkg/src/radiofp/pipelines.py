"""Ready-made pipelines for the five model families.

A pipeline bundles the feature representation, scaling convention and
train/predict callables of one model family so the evaluation harness can
treat them uniformly. Defaults follow the hyperparameters that worked
best in the field study this toolkit models: C=1 for the linear SVMs,
C=10 / gamma=0.01 for the RBF SVM, 128 trees of depth up to 32 for the
forest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import convnet, kernel_svm, linear_svm, random_forest
from .domain import N_LINKS, CoarseClass, FineClass
from .evaluation import Pipeline
from .features import FeatureLayout, normalize_links

MODEL_NAMES = ("l1l2_svm", "l2l2_svm", "rbf_svm", "forest", "convnet")

ALL_LINKS = tuple(range(1, N_LINKS + 1))


def _classes_for(task: str, ordinals) -> tuple:
    enum = FineClass if task == "fine" else CoarseClass
    return tuple(enum(int(v)) for v in sorted(set(int(o) for o in ordinals)))


def _linear_pipeline(reg, name, task, features, links, standardize, hyper):
    C = float(hyper.get("C", linear_svm.DEFAULT_C))
    tol = float(hyper.get("tol", linear_svm.DEFAULT_TOL))
    layout = FeatureLayout(features, links)

    def fit(X, y, seed):
        return linear_svm.train_multiclass(
            X, y, C=C, reg=reg, layout=layout, classes=_classes_for(task, y), tol=tol
        )

    def size_metrics(model):
        nz = np.abs(model.betas) > linear_svm.NONZERO_EPS
        return {
            "nonzero_weights_total": int(nz.sum()),
            "nonzero_weights_first_vector": int(nz[0].sum()),
        }

    return Pipeline(
        name=name,
        task=task,
        feature_kind=features,
        links=links,
        standardize=standardize,
        fit=fit,
        predict=linear_svm.predict_batch,
        size_metrics=size_metrics,
    )


def _rbf_pipeline(task, features, links, standardize, hyper):
    C = float(hyper.get("C", kernel_svm.DEFAULT_C))
    gamma = float(hyper.get("gamma", kernel_svm.DEFAULT_GAMMA))
    tol = float(hyper.get("tol", kernel_svm.DEFAULT_TOL))
    layout = FeatureLayout(features, links)

    def fit(X, y, seed):
        return kernel_svm.train_rbf_multiclass(
            X, y, C=C, gamma=gamma, tol=tol, layout=layout, classes=_classes_for(task, y)
        )

    def size_metrics(model):
        return {"support_vectors": kernel_svm.support_vector_count(model)}

    return Pipeline(
        name="rbf_svm",
        task=task,
        feature_kind=features,
        links=links,
        standardize=standardize,
        fit=fit,
        predict=kernel_svm.predict_rbf_batch,
        size_metrics=size_metrics,
    )


def _forest_pipeline(task, features, links, standardize, hyper):
    n_trees = int(hyper.get("n_trees", random_forest.DEFAULT_N_TREES))
    max_depth = hyper.get("max_depth", random_forest.DEFAULT_MAX_DEPTH)
    max_depth = None if max_depth in (None, "none") else int(max_depth)
    max_features = hyper.get("max_features", "sqrt")

    def fit(X, y, seed):
        return random_forest.train_forest(
            X, y, n_trees=n_trees, max_depth=max_depth, max_features=max_features, seed=seed
        )

    def size_metrics(model):
        def count_nodes(node):
            if node.is_leaf:
                return 1
            return 1 + count_nodes(node.left) + count_nodes(node.right)

        return {
            "trees": model.n_trees,
            "nodes_total": sum(count_nodes(t) for t in model.trees),
        }

    return Pipeline(
        name="forest",
        task=task,
        feature_kind=features,
        links=links,
        standardize=standardize,
        fit=fit,
        predict=random_forest.predict_forest_batch,
        size_metrics=size_metrics,
    )


@dataclass
class NetModel:
    params: convnet.NetworkParams
    spec: convnet.NetworkSpec
    ordinals: np.ndarray  # position -> class ordinal
    history: list  # per-epoch (epoch, loss, train_acc) rows


def _convnet_pipeline(task, links, standardize, hyper):
    epochs = int(hyper.get("epochs", 15))
    batch_size = int(hyper.get("batch_size", 32))
    lr = float(hyper.get("lr", 1e-3))
    n_filters = int(hyper.get("n_filters", 16))
    fc_widths = tuple(hyper.get("fc_widths", (128, 64, 32)))

    def fit(X, y, seed):
        ordinals = np.array(sorted(set(int(v) for v in y)))
        index_of = {v: i for i, v in enumerate(ordinals)}
        labels = np.array([index_of[int(v)] for v in y])
        spec = convnet.NetworkSpec(
            n_classes=len(ordinals),
            input_height=X.shape[1],
            input_width=X.shape[2],
            n_filters=n_filters,
            fc_widths=fc_widths,
        )
        params, history = convnet.train_net(
            spec, X, labels, epochs=epochs, batch_size=batch_size, seed=seed, lr=lr
        )
        return NetModel(params=params, spec=spec, ordinals=ordinals, history=history)

    def predict(model, X):
        return model.ordinals[convnet.predict_net(model.params, model.spec, X)]

    def size_metrics(model):
        total = sum(
            getattr(model.params, name).size for name in convnet.TRAINABLE_FIELDS
        )
        return {"parameters": int(total)}

    return Pipeline(
        name="convnet",
        task=task,
        feature_kind="tensor",
        links=links,
        standardize=standardize,
        fit=fit,
        predict=predict,
        size_metrics=size_metrics,
    )


def make_pipeline(
    model: str,
    task: str = "coarse",
    features: str | None = None,
    links=ALL_LINKS,
    standardize: bool | None = None,
    hyper: dict | None = None,
) -> Pipeline:
    """Build a pipeline for one of the five model families.

    ``features`` defaults to "raw" for the vector models; the conv net
    always consumes (links x 800) tensors and rejects flattened features.
    ``standardize`` defaults on for the SVMs and the conv net (per link),
    off for the forest.
    """
    if model not in MODEL_NAMES:
        raise ValueError(f"unknown model {model!r}; choose from {MODEL_NAMES}")
    if task not in ("fine", "coarse"):
        raise ValueError(f"unknown task {task!r}")
    links = normalize_links(links)
    hyper = dict(hyper or {})

    if model == "convnet":
        if features not in (None, "tensor"):
            raise ValueError("convnet consumes link-by-time tensors, not flattened features")
        return _convnet_pipeline(task, links, True if standardize is None else standardize, hyper)

    features = features or "raw"
    if features not in ("raw", "reduced"):
        raise ValueError(f"unknown feature kind {features!r}")
    if model == "forest":
        standardize = False if standardize is None else standardize
        return _forest_pipeline(task, features, links, standardize, hyper)
    standardize = True if standardize is None else standardize
    if model == "rbf_svm":
        return _rbf_pipeline(task, features, links, standardize, hyper)
    reg = "l1" if model == "l1l2_svm" else "l2"
    return _linear_pipeline(reg, model, task, features, links, standardize, hyper)
