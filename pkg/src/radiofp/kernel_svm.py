"""RBF-kernel SVM trained by sequential minimal optimization.

The dual is solved with maximal-violating-pair working-set selection:
each step picks the most violating pair of dual variables, moves them to
the box-clipped optimum along the equality-feasible direction and updates
the gradient with two kernel rows. Rows are served from an LRU-bounded
cache so desk-scale training never materializes more of the Gram matrix
than it has to.
"""

from __future__ import annotations

import base64
import json
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .domain import CoarseClass, FineClass
from .features import FeatureLayout

DEFAULT_C = 10.0
DEFAULT_GAMMA = 1e-2
DEFAULT_TOL = 1e-3
DEFAULT_CACHE_ROWS = 1024


def rbf_kernel(x, x2, gamma: float) -> float:
    """exp(-gamma * ||x - x2||^2); 1 exactly when the points coincide."""
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x.shape != x2.shape:
        raise ValueError("rbf_kernel requires equal dimensions")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    diff = x - x2
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_kernel_matrix(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ValueError("rbf_kernel_matrix requires equal dimensions")
    sq = (
        (A**2).sum(axis=1)[:, None]
        + (B**2).sum(axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)  # clamp float cancellation noise
    return np.exp(-gamma * sq)


class KernelRowCache:
    """LRU-bounded cache of Gram-matrix rows for one training matrix."""

    def __init__(self, X, gamma: float, max_rows: int = DEFAULT_CACHE_ROWS):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.gamma = gamma
        self.max_rows = max(1, int(max_rows))
        self._sq = (self.X**2).sum(axis=1)
        self._rows = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        sq = self._sq[i] + self._sq - 2.0 * (self.X @ self.X[i])
        np.maximum(sq, 0.0, out=sq)
        row = np.exp(-self.gamma * sq)
        self._rows[i] = row
        if len(self._rows) > self.max_rows:
            self._rows.popitem(last=False)
        return row


@dataclass(frozen=True)
class BinaryRbfPart:
    """One one-vs-all subproblem: its support vectors and dual solution."""

    sv_x: np.ndarray  # (n_sv, d)
    sv_coef: np.ndarray  # alpha_i * y_i per support vector
    sv_alpha: np.ndarray  # alpha_i per support vector
    sv_indices: np.ndarray  # positions in the training set
    bias: float


def _smo_solve(y, C, cache: KernelRowCache, tol, max_iter):
    """Maximal-violating-pair SMO on the C-SVM dual."""
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a at a = 0
    pos = y > 0
    iterations = 0
    gap = np.inf
    while iterations < max_iter:
        opt = -y * grad
        up = (pos & (alpha < C)) | (~pos & (alpha > 0.0))
        low = (~pos & (alpha < C)) | (pos & (alpha > 0.0))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, opt, -np.inf)))
        j = int(np.argmin(np.where(low, opt, np.inf)))
        gap = opt[i] - opt[j]
        if gap <= tol:
            break
        ki = cache.row(i)
        kj = cache.row(j)
        curv = ki[i] + kj[j] - 2.0 * ki[j]
        if curv <= 1e-12:
            curv = 1e-12
        lam = gap / curv
        room_i = C - alpha[i] if pos[i] else alpha[i]
        room_j = alpha[j] if pos[j] else C - alpha[j]
        lam = min(lam, room_i, room_j)
        # pair update along (+y_i, -y_j); keeps sum(y * alpha) = 0
        alpha[i] = min(C, max(0.0, alpha[i] + y[i] * lam))
        alpha[j] = min(C, max(0.0, alpha[j] - y[j] * lam))
        grad += y * lam * (ki - kj)
        iterations += 1
    # bias from free support vectors; otherwise the KKT interval midpoint
    free = (alpha > 1e-12) & (alpha < C - 1e-12)
    opt = -y * grad
    if free.any():
        bias = float(opt[free].mean())
    else:
        up = (pos & (alpha < C)) | (~pos & (alpha > 0.0))
        low = (~pos & (alpha < C)) | (pos & (alpha > 0.0))
        hi = opt[up].max() if up.any() else 0.0
        lo = opt[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    info = {"kkt_gap": float(gap), "iterations": iterations, "converged": gap <= tol}
    return alpha, bias, info


def train_rbf(
    X,
    y,
    C: float = DEFAULT_C,
    gamma: float = DEFAULT_GAMMA,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200_000,
    cache: KernelRowCache | None = None,
    full_output: bool = False,
):
    """Train one binary RBF SVM part; labels must be +-1."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one label per row")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both classes")
    if C <= 0 or gamma <= 0:
        raise ValueError("C and gamma must be positive")
    if cache is None:
        cache = KernelRowCache(X, gamma)
    alpha, bias, info = _smo_solve(y, C, cache, tol, max_iter)
    sv = alpha > 0.0
    part = BinaryRbfPart(
        sv_x=X[sv].copy(),
        sv_coef=(alpha * y)[sv],
        sv_alpha=alpha[sv],
        sv_indices=np.flatnonzero(sv),
        bias=bias,
    )
    if full_output:
        return part, info
    return part


@dataclass(frozen=True)
class RbfModel:
    """One-vs-all RBF SVM: one BinaryRbfPart per class."""

    classes: tuple
    parts: tuple
    C: float
    gamma: float
    layout: FeatureLayout | None = None


def train_rbf_multiclass(
    X,
    labels,
    C: float = DEFAULT_C,
    gamma: float = DEFAULT_GAMMA,
    tol: float = DEFAULT_TOL,
    layout: FeatureLayout | None = None,
    classes=None,
    cache_rows: int = DEFAULT_CACHE_ROWS,
) -> RbfModel:
    """One-vs-all training; the kernel row cache is shared across classes."""
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
    cache = KernelRowCache(X, gamma, max_rows=cache_rows)
    parts = []
    for cls in classes:
        y = np.where(ordinals == cls.value, 1.0, -1.0)
        parts.append(train_rbf(X, y, C=C, gamma=gamma, tol=tol, cache=cache))
    return RbfModel(classes=tuple(classes), parts=tuple(parts), C=C, gamma=gamma, layout=layout)


def decision_value(part: BinaryRbfPart, X, gamma: float) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if part.sv_x.size == 0:
        return np.full(X.shape[0], part.bias)
    return rbf_kernel_matrix(X, part.sv_x, gamma) @ part.sv_coef + part.bias


def decision_matrix(model: RbfModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.column_stack([decision_value(p, X, model.gamma) for p in model.parts])


def predict_rbf(model: RbfModel, x):
    """Highest-decision class; ties go to the lowest ordinal."""
    scores = decision_matrix(model, np.atleast_2d(x))[0]
    return model.classes[int(np.argmax(scores))]


def predict_rbf_batch(model: RbfModel, X) -> np.ndarray:
    scores = decision_matrix(model, X)
    ordinals = np.array([c.value for c in model.classes])
    return ordinals[np.argmax(scores, axis=1)]


def support_vector_count(model: RbfModel) -> int:
    """Distinct training points carrying a positive dual coefficient."""
    indices = set()
    for part in model.parts:
        indices.update(int(i) for i in part.sv_indices)
    return len(indices)


def _encode_array(arr, encoding):
    arr = np.asarray(arr, dtype=np.float64)
    if encoding == "plain":
        return arr.tolist()
    return {
        "b64": base64.b64encode(arr.tobytes()).decode("ascii"),
        "shape": list(arr.shape),
    }


def _decode_array(obj):
    if isinstance(obj, dict):
        flat = np.frombuffer(base64.b64decode(obj["b64"]), dtype=np.float64)
        return flat.reshape(obj["shape"]).copy()
    return np.asarray(obj, dtype=np.float64)


def save_rbf_model(model: RbfModel, path, encoding: str = "plain") -> None:
    if encoding not in ("plain", "base64"):
        raise ValueError(f"unknown encoding {encoding!r}")
    obj = {
        "format": "radiofp-rbf-v1",
        "encoding": encoding,
        "task": "fine" if isinstance(model.classes[0], FineClass) else "coarse",
        "classes": [c.canonical_name for c in model.classes],
        "C": model.C,
        "gamma": model.gamma,
        "layout": None
        if model.layout is None
        else {"kind": model.layout.kind, "links": list(model.layout.links)},
        "parts": [
            {
                "sv_x": _encode_array(p.sv_x, encoding),
                "sv_coef": _encode_array(p.sv_coef, encoding),
                "sv_alpha": _encode_array(p.sv_alpha, encoding),
                "sv_indices": [int(i) for i in p.sv_indices],
                "bias": p.bias,
            }
            for p in model.parts
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_rbf_model(path) -> RbfModel:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("format") != "radiofp-rbf-v1":
        raise ValueError(f"{path}: not a radiofp RBF model file")
    enum_type = FineClass if obj["task"] == "fine" else CoarseClass
    classes = tuple(enum_type[name.upper()] for name in obj["classes"])
    layout = obj["layout"]
    if layout is not None:
        layout = FeatureLayout(layout["kind"], tuple(layout["links"]))
    parts = tuple(
        BinaryRbfPart(
            sv_x=_decode_array(p["sv_x"]),
            sv_coef=_decode_array(p["sv_coef"]),
            sv_alpha=_decode_array(p["sv_alpha"]),
            sv_indices=np.asarray(p["sv_indices"], dtype=np.int64),
            bias=float(p["bias"]),
        )
        for p in obj["parts"]
    )
    return RbfModel(
        classes=classes, parts=parts, C=float(obj["C"]), gamma=float(obj["gamma"]), layout=layout
    )
