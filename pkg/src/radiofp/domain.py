"""Core data types for multi-link RSSI vehicle fingerprints."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

N_LINKS = 9
N_SAMPLES = 800

# Links between posts facing each other across the road. The remaining links
# cross diagonally between offset posts.
DIRECT_LINKS = (1, 5, 9)


class FineClass(IntEnum):
    PASSENGER_CAR = 1
    PASSENGER_CAR_WITH_TRAILER = 2
    SUV = 3
    MINIVAN = 4
    VAN = 5
    TRUCK = 6
    TRUCK_WITH_TRAILER = 7
    BUS = 8
    SEMI_TRUCK = 9

    @property
    def canonical_name(self) -> str:
        return self.name.lower()


class CoarseClass(IntEnum):
    CAR_LIKE = 1
    TRUCK_LIKE = 2

    @property
    def canonical_name(self) -> str:
        return self.name.lower()


_NAME_TO_FINE = {c.canonical_name: c for c in FineClass}

# Vehicles per fine class recorded in the original highway measurement
# campaign (2635 passages total). Kept as metadata; the synthetic generator
# does not depend on it.
FIELD_SAMPLE_COUNTS = {
    FineClass.PASSENGER_CAR: 1528,
    FineClass.PASSENGER_CAR_WITH_TRAILER: 19,
    FineClass.SUV: 93,
    FineClass.MINIVAN: 128,
    FineClass.VAN: 172,
    FineClass.TRUCK: 75,
    FineClass.TRUCK_WITH_TRAILER: 52,
    FineClass.BUS: 5,
    FineClass.SEMI_TRUCK: 563,
}


def coarse_of(fine: FineClass) -> CoarseClass:
    """Map a fine class to its car-like / truck-like coarse class."""
    if fine <= FineClass.VAN:
        return CoarseClass.CAR_LIKE
    return CoarseClass.TRUCK_LIKE


def fine_class_from_name(name: str) -> FineClass:
    try:
        return _NAME_TO_FINE[name]
    except KeyError:
        raise ValueError(f"unknown fine class name: {name!r}") from None


class DatasetFormatError(ValueError):
    """Raised when a dataset file violates the JSONL record format."""


@dataclass(frozen=True)
class Fingerprint:
    """One vehicle passage: a 9x800 RSSI matrix (dBm) plus its fine label.

    Row i of ``series`` holds link i+1 (links are conventionally numbered
    1..9). Immutable after construction.
    """

    id: str
    fine: FineClass
    series: np.ndarray

    def __post_init__(self):
        series = np.asarray(self.series, dtype=np.float64)
        if series.shape != (N_LINKS, N_SAMPLES):
            raise ValueError(
                f"fingerprint {self.id!r}: series shape {series.shape}, "
                f"expected ({N_LINKS}, {N_SAMPLES})"
            )
        if not np.isfinite(series).all():
            raise ValueError(f"fingerprint {self.id!r}: non-finite RSSI values")
        series = np.ascontiguousarray(series)
        series.flags.writeable = False
        object.__setattr__(self, "series", series)

    @property
    def coarse(self) -> CoarseClass:
        return coarse_of(self.fine)

    def link(self, number: int) -> np.ndarray:
        """Return the 800-sample series of link ``number`` (1-based)."""
        if not 1 <= number <= N_LINKS:
            raise ValueError(f"link number {number} outside 1..{N_LINKS}")
        return self.series[number - 1]


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of fingerprints with unique ids."""

    records: tuple = field(default_factory=tuple)

    def __post_init__(self):
        records = tuple(self.records)
        seen = set()
        for rec in records:
            if rec.id in seen:
                raise ValueError(f"duplicate fingerprint id: {rec.id!r}")
            seen.add(rec.id)
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def fine_labels(self) -> np.ndarray:
        """Fine-class ordinals (1..9) as an int array."""
        return np.array([rec.fine.value for rec in self.records], dtype=np.int64)

    def coarse_labels(self) -> np.ndarray:
        return np.array([rec.coarse.value for rec in self.records], dtype=np.int64)

    def counts_by_class(self) -> dict:
        counts = {c: 0 for c in FineClass}
        for rec in self.records:
            counts[rec.fine] += 1
        return counts

    def subset(self, indices) -> "Dataset":
        return Dataset(tuple(self.records[i] for i in indices))

    def sorted_by_class(self) -> "Dataset":
        """Records reordered so fine-class blocks are contiguous (then by id)."""
        order = sorted(self.records, key=lambda r: (r.fine.value, r.id))
        return Dataset(tuple(order))


def load_dataset(path) -> Dataset:
    """Read a JSONL dataset file (one fingerprint object per line)."""
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: invalid JSON ({exc})") from None
            try:
                rec_id = obj["id"]
                class_name = obj["fine_class"]
                series = obj["series"]
            except (KeyError, TypeError):
                raise DatasetFormatError(
                    f"line {lineno}: record must have id, fine_class and series fields"
                ) from None
            try:
                fine = fine_class_from_name(class_name)
            except ValueError as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from None
            arr = np.asarray(series, dtype=np.float64)
            if arr.ndim != 2 or arr.shape != (N_LINKS, N_SAMPLES):
                raise DatasetFormatError(
                    f"line {lineno}: series shape {arr.shape if arr.ndim == 2 else 'ragged'}, "
                    f"expected ({N_LINKS}, {N_SAMPLES})"
                )
            if rec_id in seen:
                raise DatasetFormatError(f"line {lineno}: duplicate id {rec_id!r}")
            seen.add(rec_id)
            try:
                records.append(Fingerprint(id=rec_id, fine=fine, series=arr))
            except ValueError as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from None
    return Dataset(tuple(records))


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as JSONL; round-trips losslessly for finite values."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in dataset:
            obj = {
                "id": rec.id,
                "fine_class": rec.fine.canonical_name,
                # repr-based float serialization keeps full double precision
                "series": [[float(v) for v in row] for row in rec.series],
            }
            fh.write(json.dumps(obj) + "\n")


def segment_stream(
    stream,
    baseline: float,
    drop_threshold: float,
    min_drop_len: int,
    trigger_links=DIRECT_LINKS,
) -> list:
    """Cut unlabeled 800-sample windows out of a continuous 9-channel stream.

    A window is emitted for each maximal run of consecutive samples where at
    least one trigger link stays below ``baseline - drop_threshold``, provided
    the run is at least ``min_drop_len`` samples long. Each window is centered
    on the run midpoint; parts that fall outside the stream are padded with
    the baseline value.
    """
    if drop_threshold <= 0:
        raise ValueError("drop_threshold must be positive")
    if min_drop_len < 1:
        raise ValueError("min_drop_len must be >= 1")
    stream = np.asarray(stream, dtype=np.float64)
    if stream.ndim != 2 or stream.shape[0] != N_LINKS:
        raise ValueError(f"stream must have shape ({N_LINKS}, T)")
    n = stream.shape[1]
    if n < min_drop_len:
        return []

    rows = [l - 1 for l in trigger_links]
    below = (stream[rows] < baseline - drop_threshold).any(axis=0)

    windows = []
    t = 0
    while t < n:
        if not below[t]:
            t += 1
            continue
        start = t
        while t < n and below[t]:
            t += 1
        end = t - 1  # inclusive
        if end - start + 1 < min_drop_len:
            continue
        center = (start + end) // 2
        lo = center - N_SAMPLES // 2
        window = np.full((N_LINKS, N_SAMPLES), baseline, dtype=np.float64)
        src_lo = max(lo, 0)
        src_hi = min(lo + N_SAMPLES, n)
        if src_lo < src_hi:
            window[:, src_lo - lo : src_hi - lo] = stream[:, src_lo:src_hi]
        windows.append(window)
    return windows
