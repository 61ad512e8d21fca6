"""Feature pipelines: raw flattening, reduced analytic features, scaling.

Raw features stack the selected links' 800-sample series link-major into one
vector (7200-dim for all nine links). Reduced features keep 15 numbers per
link: positions and values of the top-3 minima and maxima plus the power
sums ``sum(x**j)`` for j = 1, 2, 3.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .domain import N_LINKS, N_SAMPLES, Dataset, Fingerprint

REDUCED_PER_LINK = 15


def normalize_links(links) -> tuple:
    """Validate a link subset and return it as a sorted tuple."""
    links = sorted(set(int(l) for l in links))
    if not links:
        raise ValueError("link subset must be nonempty")
    if links[0] < 1 or links[-1] > N_LINKS:
        raise ValueError(f"links must lie in 1..{N_LINKS}, got {links}")
    return tuple(links)


@dataclass(frozen=True)
class FeatureLayout:
    """Describes how a feature vector was built from a fingerprint."""

    kind: str  # "raw" | "reduced"
    links: tuple = tuple(range(1, N_LINKS + 1))

    def __post_init__(self):
        if self.kind not in ("raw", "reduced"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        object.__setattr__(self, "links", normalize_links(self.links))

    @property
    def per_link(self) -> int:
        return N_SAMPLES if self.kind == "raw" else REDUCED_PER_LINK

    @property
    def dim(self) -> int:
        return self.per_link * len(self.links)


def raw_features(fp: Fingerprint, links=range(1, N_LINKS + 1)) -> np.ndarray:
    """Stack the selected links' series into one vector, links ascending."""
    links = normalize_links(links)
    return np.concatenate([fp.series[l - 1] for l in links])


def top_extrema(series, k: int = 3):
    """(position, value) pairs of the k smallest and k largest samples.

    Ties are broken by the smaller sample index; minima values come out
    nondecreasing, maxima values nonincreasing.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.size < k:
        raise ValueError(f"series of length {series.size} has no top-{k} extrema")
    idx = np.arange(series.size)
    min_order = np.lexsort((idx, series))[:k]
    max_order = np.lexsort((idx, -series))[:k]
    minima = [(int(i), float(series[i])) for i in min_order]
    maxima = [(int(i), float(series[i])) for i in max_order]
    return minima, maxima


def power_sums(series, powers=(1, 2, 3)) -> np.ndarray:
    """sum(x**j) over the whole series for each power j."""
    series = np.asarray(series, dtype=np.float64)
    return np.array([np.sum(series**j) for j in powers])


def reduced_features(fp: Fingerprint, links=range(1, N_LINKS + 1)) -> np.ndarray:
    """15 analytic features per selected link (135-dim for all nine).

    Per-link layout: (pos, val) of minima ranks 1..3, (pos, val) of maxima
    ranks 1..3, then the three power sums. Positions are 0-based sample
    indices cast to float.
    """
    links = normalize_links(links)
    out = np.empty(REDUCED_PER_LINK * len(links))
    for j, l in enumerate(links):
        series = fp.series[l - 1]
        minima, maxima = top_extrema(series, k=3)
        block = out[j * REDUCED_PER_LINK : (j + 1) * REDUCED_PER_LINK]
        for r, (pos, val) in enumerate(minima):
            block[2 * r] = pos
            block[2 * r + 1] = val
        for r, (pos, val) in enumerate(maxima):
            block[6 + 2 * r] = pos
            block[6 + 2 * r + 1] = val
        block[12:15] = power_sums(series)
    return out


def raw_feature_names(links=range(1, N_LINKS + 1)) -> list:
    links = normalize_links(links)
    return [f"phi{l}_t{t:03d}" for l in links for t in range(N_SAMPLES)]


def reduced_feature_names(links=range(1, N_LINKS + 1)) -> list:
    names = []
    for l in normalize_links(links):
        for r in (1, 2, 3):
            names += [f"phi{l}_min{r}_pos", f"phi{l}_min{r}_val"]
        for r in (1, 2, 3):
            names += [f"phi{l}_max{r}_pos", f"phi{l}_max{r}_val"]
        names += [f"phi{l}_pow1", f"phi{l}_pow2", f"phi{l}_pow3"]
    return names


def feature_matrix(dataset: Dataset, kind: str, links=range(1, N_LINKS + 1)) -> np.ndarray:
    """Feature vectors of all records stacked row-wise."""
    if kind == "raw":
        extract = raw_features
    elif kind == "reduced":
        extract = reduced_features
    else:
        raise ValueError(f"unknown feature kind {kind!r}")
    links = normalize_links(links)
    return np.array([extract(rec, links) for rec in dataset])


@dataclass(frozen=True)
class Scaler:
    """Per-feature mean/std fitted on training data (population std)."""

    mean: np.ndarray
    std: np.ndarray
    constant_mask: np.ndarray  # True where the fitted std is 0

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]


def standardize_fit(X) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a nonempty 2-D matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # ddof=0
    return Scaler(mean=mean, std=std, constant_mask=std == 0.0)


def standardize_apply(scaler: Scaler, X) -> np.ndarray:
    """(x - mean) / std per column; zero-std columns map to 0."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != scaler.n_features:
        raise ValueError(f"expected {scaler.n_features} features, got {X.shape[-1]}")
    safe_std = np.where(scaler.constant_mask, 1.0, scaler.std)
    out = (X - scaler.mean) / safe_std
    if scaler.constant_mask.any():
        out[..., scaler.constant_mask] = 0.0
    return out


def save_matrix_csv(X, names: list, path) -> None:
    """Write a feature matrix with a header row of feature names."""
    X = np.asarray(X)
    if X.shape[1] != len(names):
        raise ValueError("header length does not match matrix width")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in X:
            writer.writerow([repr(float(v)) for v in row])
