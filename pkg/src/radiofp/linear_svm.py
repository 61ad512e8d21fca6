"""Linear SVMs with squared hinge loss, L2 or L1 regularization.

Both variants are trained natively, without a bias term:

* L2 regularizer: dual coordinate descent on the squared-hinge dual
  (one box-constrained dual variable per sample, exact coordinate minimizer,
  primal weights maintained incrementally).
* L1 regularizer: cyclic primal coordinate descent with a Newton step,
  soft-thresholding and an Armijo-style line search; produces exact zeros,
  which is what makes the per-link weight counting meaningful.

Multiclass problems use one-vs-all with ties broken toward the lowest
class ordinal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numba
import numpy as np

from .domain import CoarseClass, FineClass
from .features import FeatureLayout

DEFAULT_C = 1.0
DEFAULT_TOL = 1e-6
DEFAULT_MAX_PASSES = 2000
NONZERO_EPS = 1e-9


def objective(beta, X, y, C: float, reg: str) -> float:
    """Regularizer plus C times the summed squared hinge loss."""
    beta = np.asarray(beta, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[1] != beta.shape[0] or X.shape[0] != y.shape[0]:
        raise ValueError("dimension mismatch between beta, X and y")
    if C <= 0:
        raise ValueError("C must be positive")
    margins = np.maximum(0.0, 1.0 - y * (X @ beta))
    loss = C * np.sum(margins**2)
    if reg == "l2":
        return 0.5 * float(beta @ beta) + loss
    if reg == "l1":
        return float(np.abs(beta).sum()) + loss
    raise ValueError(f"unknown regularizer {reg!r}")


@numba.njit(cache=True)
def _dual_cd_l2(X, y, C, order, tol, max_passes):
    """Dual coordinate descent for the L2-regularized squared hinge SVM.

    Dual variables have no upper box bound (the squared loss adds 1/(2C)
    to the diagonal instead); the primal weights w = sum(alpha_i y_i x_i)
    are kept in sync after every update.
    """
    n, d = X.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    diag = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += X[i, j] * X[i, j]
        diag[i] = s + 1.0 / (2.0 * C)
    max_pg = np.inf
    passes = 0
    while passes < max_passes:
        max_pg = 0.0
        for k in range(n):
            i = order[k]
            xw = 0.0
            for j in range(d):
                xw += X[i, j] * w[j]
            g = y[i] * xw - 1.0 + alpha[i] / (2.0 * C)
            if alpha[i] == 0.0:
                pg = g if g < 0.0 else 0.0
            else:
                pg = g
            apg = abs(pg)
            if apg > max_pg:
                max_pg = apg
            if apg > 1e-14:
                old = alpha[i]
                new = old - g / diag[i]
                if new < 0.0:
                    new = 0.0
                if new != old:
                    alpha[i] = new
                    delta = (new - old) * y[i]
                    for j in range(d):
                        w[j] += delta * X[i, j]
        passes += 1
        if max_pg <= tol:
            break
    return w, max_pg, passes


@numba.njit(cache=True)
def _primal_cd_l1(X, y, C, tol, max_passes):
    """Cyclic coordinate descent for the L1-regularized squared hinge SVM.

    Per coordinate: generalized Newton step on the smooth loss, folded
    through the soft-threshold of the L1 term, then a backtracking line
    search against the true one-dimensional objective. Descent is monotone
    and coordinates never move off exact zero unless the subgradient
    demands it.
    """
    n, d = X.shape
    beta = np.zeros(d)
    z = np.zeros(n)  # X @ beta
    sigma = 0.01
    max_viol = np.inf
    passes = 0
    while passes < max_passes:
        max_viol = 0.0
        for j in range(d):
            g = 0.0
            h = 0.0
            for i in range(n):
                m = 1.0 - y[i] * z[i]
                if m > 0.0:
                    g -= 2.0 * C * y[i] * X[i, j] * m
                    h += 2.0 * C * X[i, j] * X[i, j]
            if h < 1e-12:
                h = 1e-12
            # subgradient optimality violation at the current point
            if beta[j] > 0.0:
                viol = abs(g + 1.0)
            elif beta[j] < 0.0:
                viol = abs(g - 1.0)
            else:
                viol = abs(g) - 1.0
                if viol < 0.0:
                    viol = 0.0
            if viol > max_viol:
                max_viol = viol
            # Newton step through the soft threshold
            if g + 1.0 <= h * beta[j]:
                step = -(g + 1.0) / h
            elif g - 1.0 >= h * beta[j]:
                step = -(g - 1.0) / h
            else:
                step = -beta[j]
            if abs(step) < 1e-14:
                continue
            loss_old = 0.0
            for i in range(n):
                m = 1.0 - y[i] * z[i]
                if m > 0.0:
                    loss_old += m * m
            loss_old *= C
            bound = g * step + abs(beta[j] + step) - abs(beta[j])
            lam = 1.0
            trial = 0.0
            accepted = False
            for _ in range(30):
                trial = lam * step
                loss_new = 0.0
                for i in range(n):
                    m = 1.0 - y[i] * (z[i] + trial * X[i, j])
                    if m > 0.0:
                        loss_new += m * m
                loss_new *= C
                decrease = loss_new - loss_old + abs(beta[j] + trial) - abs(beta[j])
                if decrease <= sigma * lam * bound:
                    accepted = True
                    break
                lam *= 0.5
            if accepted:
                beta[j] += trial
                for i in range(n):
                    z[i] += trial * X[i, j]
        passes += 1
        if max_viol <= tol:
            break
    return beta, max_viol, passes


def train_binary(
    X,
    y,
    C: float = DEFAULT_C,
    reg: str = "l2",
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
    full_output: bool = False,
):
    """Train one binary squared-hinge SVM; labels must be +-1.

    Returns the weight vector, or ``(weights, info)`` with the solver's
    final optimality residual, pass count and convergence flag when
    ``full_output`` is set.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one label per row")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both classes")
    if C <= 0:
        raise ValueError("C must be positive")
    if reg == "l2":
        # fixed internal permutation keeps training deterministic
        order = np.random.default_rng(0).permutation(X.shape[0])
        beta, residual, passes = _dual_cd_l2(X, y, C, order, tol, max_passes)
    elif reg == "l1":
        beta, residual, passes = _primal_cd_l1(X, y, C, tol, max_passes)
    else:
        raise ValueError(f"unknown regularizer {reg!r}")
    # zero-baseline contract even on iteration-capped exits
    if objective(beta, X, y, C, reg) > C * X.shape[0]:
        beta = np.zeros(X.shape[1])
    if full_output:
        info = {"residual": float(residual), "passes": int(passes), "converged": residual <= tol}
        return beta, info
    return beta


@dataclass(frozen=True)
class LinearModel:
    """One-vs-all linear model: one weight vector per class, no bias."""

    classes: tuple  # FineClass or CoarseClass members, ascending ordinals
    betas: np.ndarray  # (n_classes, d)
    reg: str
    C: float
    layout: FeatureLayout | None = None  # None for bare vectors (toy data)

    def __post_init__(self):
        if tuple(sorted(c.value for c in self.classes)) != tuple(c.value for c in self.classes):
            raise ValueError("classes must be in ascending ordinal order")
        if self.betas.ndim != 2 or self.betas.shape[0] != len(self.classes):
            raise ValueError("betas must hold one weight vector per class")
        if self.layout is not None and self.betas.shape[1] != self.layout.dim:
            raise ValueError(
                f"weight dimension {self.betas.shape[1]} does not match "
                f"layout dim {self.layout.dim}"
            )
        if not np.isfinite(self.betas).all():
            raise ValueError("model weights must be finite")

    @property
    def dim(self) -> int:
        return self.betas.shape[1]


def train_multiclass(
    X,
    labels,
    C: float = DEFAULT_C,
    reg: str = "l2",
    layout: FeatureLayout | None = None,
    classes=None,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> LinearModel:
    """One-vs-all training over FineClass or CoarseClass labels."""
    X = np.asarray(X, dtype=np.float64)
    labels = list(labels)
    if classes is None:
        if not isinstance(labels[0], (FineClass, CoarseClass)):
            raise ValueError("pass classes explicitly for plain integer labels")
        classes = tuple(type(labels[0]))
    ordinals = np.array([c.value if hasattr(c, "value") else int(c) for c in labels])
    present = set(ordinals.tolist())
    if len(present) < 2:
        raise ValueError("training data must contain at least 2 distinct classes")
    for c in classes:
        if c.value not in present:
            raise ValueError(f"class {c.canonical_name!r} absent from training data")
    betas = np.empty((len(classes), X.shape[1]))
    for k, cls in enumerate(classes):
        y = np.where(ordinals == cls.value, 1.0, -1.0)
        betas[k] = train_binary(X, y, C=C, reg=reg, tol=tol, max_passes=max_passes)
    return LinearModel(classes=tuple(classes), betas=betas, reg=reg, C=C, layout=layout)


def decision_scores(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.dim:
        raise ValueError(f"expected {model.dim} features, got {X.shape[-1]}")
    return X @ model.betas.T


def predict(model: LinearModel, x):
    """Highest-scoring class; ties go to the lowest ordinal."""
    scores = decision_scores(model, np.atleast_2d(x))[0]
    return model.classes[int(np.argmax(scores))]  # argmax takes the first max


def predict_batch(model: LinearModel, X) -> np.ndarray:
    """Predicted class ordinals for each row of X."""
    scores = decision_scores(model, X)
    ordinals = np.array([c.value for c in model.classes])
    return ordinals[np.argmax(scores, axis=1)]


def nonzero_counts(model: LinearModel, epsilon: float = NONZERO_EPS) -> np.ndarray:
    """Count weights with |w| > epsilon per (class, link) cell.

    Requires the raw layout, where each link owns a contiguous block of
    800 weights per class vector.
    """
    if model.layout.kind != "raw":
        raise ValueError("nonzero_counts requires a raw-layout model")
    n_links = len(model.layout.links)
    per_link = model.layout.per_link
    blocks = model.betas.reshape(len(model.classes), n_links, per_link)
    return (np.abs(blocks) > epsilon).sum(axis=2)


def save_linear_model(model: LinearModel, path) -> None:
    obj = {
        "format": "radiofp-linear-v1",
        "task": "fine" if isinstance(model.classes[0], FineClass) else "coarse",
        "classes": [c.canonical_name for c in model.classes],
        "reg": model.reg,
        "C": model.C,
        "layout": None
        if model.layout is None
        else {"kind": model.layout.kind, "links": list(model.layout.links)},
        "betas": [[float(v) for v in row] for row in model.betas],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_linear_model(path) -> LinearModel:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != "radiofp-linear-v1":
        raise ValueError(f"{path}: not a radiofp linear model file")
    enum_type = FineClass if obj["task"] == "fine" else CoarseClass
    classes = tuple(enum_type[name.upper()] for name in obj["classes"])
    layout = obj["layout"]
    if layout is not None:
        layout = FeatureLayout(layout["kind"], tuple(layout["links"]))
    return LinearModel(
        classes=classes,
        betas=np.asarray(obj["betas"], dtype=np.float64),
        reg=obj["reg"],
        C=float(obj["C"]),
        layout=layout,
    )
