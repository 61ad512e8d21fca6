"""Seeded synthetic fingerprint generator.

Produces class-separable desk-scale datasets: each passage is a baseline RSSI
level plus Gaussian noise minus one or two smooth Gaussian-bell attenuation
dips whose depth/duration statistics differ per vehicle class. Trailer
classes produce two dips (towing vehicle plus trailer).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import N_LINKS, N_SAMPLES, Dataset, FineClass, Fingerprint

# Geometry proxy for how strongly each link is attenuated: direct links
# (1, 5, 9) see the full dip, adjacent diagonals 0.6, long diagonals 0.4.
DEFAULT_LINK_SCALE = (1.0, 0.6, 0.4, 0.6, 1.0, 0.6, 0.4, 0.6, 1.0)

# Dip centers are confined to this window so the whole bell fits 800 samples.
CENTER_WINDOW = (200.0, 600.0)
# Guard distance between the sub-windows of multi-dip profiles, so dips of
# car-like trailer records cannot stack into truck-like depths.
MULTI_DIP_GUARD = 20.0


@dataclass(frozen=True)
class DipProfile:
    """Attenuation-dip statistics of one vehicle class."""

    n_dips: int
    depth_range: tuple  # dB, (lo, hi), lo > 0
    duration_range: tuple  # samples, (lo, hi), hi <= 800
    link_scale: tuple = DEFAULT_LINK_SCALE

    def __post_init__(self):
        if self.n_dips < 1:
            raise ValueError("n_dips must be >= 1")
        d_lo, d_hi = self.depth_range
        u_lo, u_hi = self.duration_range
        if not (0 < d_lo <= d_hi):
            raise ValueError(f"invalid depth_range {self.depth_range}")
        if not (0 < u_lo <= u_hi <= N_SAMPLES):
            raise ValueError(f"invalid duration_range {self.duration_range}")
        if len(self.link_scale) != N_LINKS:
            raise ValueError("link_scale must have 9 entries")
        if any(not 0.0 <= s <= 1.0 for s in self.link_scale):
            raise ValueError("link_scale entries must lie in [0, 1]")


# Car-like classes use strictly smaller depths (<= 14 dB) and durations
# (<= 140 samples) than truck-like ones (>= 17 dB, >= 150 samples), so the
# noise-free minimum-value distributions of the two coarse groups are
# disjoint by construction. Within each coarse group the (depth, duration)
# rectangles barely overlap, which keeps the nine fine classes learnable at
# desk scale under the default 1 dB noise.
DEFAULT_PROFILES = {
    FineClass.PASSENGER_CAR: DipProfile(1, (6.0, 8.0), (60.0, 90.0)),
    FineClass.PASSENGER_CAR_WITH_TRAILER: DipProfile(2, (5.0, 7.0), (50.0, 80.0)),
    FineClass.SUV: DipProfile(1, (8.5, 10.5), (75.0, 105.0)),
    FineClass.MINIVAN: DipProfile(1, (10.5, 12.5), (95.0, 125.0)),
    FineClass.VAN: DipProfile(1, (12.5, 14.0), (110.0, 140.0)),
    FineClass.TRUCK: DipProfile(1, (17.5, 20.5), (150.0, 185.0)),
    FineClass.TRUCK_WITH_TRAILER: DipProfile(2, (17.0, 20.0), (150.0, 180.0)),
    FineClass.BUS: DipProfile(1, (21.0, 24.0), (190.0, 225.0)),
    FineClass.SEMI_TRUCK: DipProfile(1, (24.5, 28.0), (235.0, 300.0)),
}


@dataclass(frozen=True)
class GeneratorConfig:
    baseline_rssi: float = -50.0  # dBm
    noise_std: float = 1.0  # dB
    profiles: dict = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    seed: int = 0
    # Physical-setup metadata; documents the modeled installation, the dip
    # model itself does not consume these.
    tx_power_dbm: float = 2.5
    frequency_ghz: float = 2.4
    antenna_height_m: float = 1.0
    road_width_m: float = 7.0
    post_distance_m: float = 5.0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        missing = [c for c in FineClass if c not in self.profiles]
        if missing:
            raise ValueError(f"profiles missing for: {[c.canonical_name for c in missing]}")


def class_profile(config: GeneratorConfig, fine: FineClass) -> DipProfile:
    """Dip profile the generator uses for ``fine``."""
    return config.profiles[fine]


def _dip_center_windows(n_dips: int):
    lo, hi = CENTER_WINDOW
    if n_dips == 1:
        return [(lo, hi)]
    seg = (hi - lo) / n_dips
    return [
        (lo + k * seg + MULTI_DIP_GUARD, lo + (k + 1) * seg - MULTI_DIP_GUARD)
        for k in range(n_dips)
    ]

def _draw_dips(rng: np.random.Generator, profile: DipProfile) -> list:
    dips = []
    for window in _dip_center_windows(profile.n_dips):
        depth = rng.uniform(*profile.depth_range)
        duration = rng.uniform(*profile.duration_range)
        center = rng.uniform(*window)
        dips.append({"depth": depth, "duration": duration, "center": center})
    return dips


def render_series(baseline: float, dips: list, link_scale, noise=None) -> np.ndarray:
    """Render one 9x800 series from drawn dip parameters (the generator's core)."""
    t = np.arange(N_SAMPLES, dtype=np.float64)
    total_dip = np.zeros(N_SAMPLES)
    for dip in dips:
        width = dip["duration"] / 6.0  # +-3 sigma covers the visible duration
        total_dip += dip["depth"] * np.exp(-((t - dip["center"]) ** 2) / (2.0 * width**2))
    series = baseline - np.outer(np.asarray(link_scale, dtype=np.float64), total_dip)
    if noise is not None:
        series = series + noise
    return series


def generate_with_params(config: GeneratorConfig, counts: dict):
    """Generate a dataset plus the per-record dip parameters that produced it.

    Deterministic for fixed (config, counts): classes are processed in
    ordinal order with a single RNG stream seeded from ``config.seed``.
    """
    for value in counts.values():
        if value < 0:
            raise ValueError("counts must be >= 0")
    rng = np.random.default_rng(config.seed)
    records = []
    log = []
    for fine in FineClass:
        profile = class_profile(config, fine)
        for i in range(counts.get(fine, 0)):
            dips = _draw_dips(rng, profile)
            noise = rng.normal(0.0, config.noise_std, size=(N_LINKS, N_SAMPLES))
            series = render_series(config.baseline_rssi, dips, profile.link_scale, noise)
            rec_id = f"{fine.canonical_name}-{i:04d}"
            records.append(Fingerprint(id=rec_id, fine=fine, series=series))
            log.append(
                {
                    "id": rec_id,
                    "fine_class": fine.canonical_name,
                    "dips": dips,
                    "link_scale": list(profile.link_scale),
                }
            )
    return Dataset(tuple(records)), log


def generate(config: GeneratorConfig, counts: dict, sidecar_path=None) -> Dataset:
    """Generate a dataset; optionally write the dip-parameter sidecar JSONL."""
    dataset, log = generate_with_params(config, counts)
    if sidecar_path is not None:
        write_sidecar(log, sidecar_path)
    return dataset


def write_sidecar(log: list, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry) + "\n")


def read_sidecar(path) -> dict:
    """Sidecar JSONL as a dict keyed by record id."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entry = json.loads(line)
                out[entry["id"]] = entry
    return out


_SCALAR_KEYS = {
    "baseline_rssi": float,
    "noise_std": float,
    "seed": int,
    "tx_power_dbm": float,
    "frequency_ghz": float,
    "antenna_height_m": float,
    "road_width_m": float,
    "post_distance_m": float,
}


def load_generator_config(path):
    """Parse a flat ``key = value`` generator config file.

    Recognized keys: the GeneratorConfig scalars (``baseline_rssi``,
    ``noise_std``, ``seed``, setup metadata), per-class record counts
    ``count.<class>``, and per-class profile overrides
    ``profile.<class>.{n_dips,depth_range,duration_range,link_scale}``
    with comma-separated numbers for ranges/scales. Lines starting with
    ``#`` are comments.

    Returns ``(config, counts)``.
    """
    scalars = {}
    counts = {}
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in _SCALAR_KEYS:
                scalars[key] = _SCALAR_KEYS[key](value)
            elif key.startswith("count."):
                fine = FineClass[key[len("count.") :].upper()]
                counts[fine] = int(value)
            elif key.startswith("profile."):
                _, class_name, attr = key.split(".", 2)
                fine = FineClass[class_name.upper()]
                fields = overrides.setdefault(fine, {})
                if attr == "n_dips":
                    fields[attr] = int(value)
                elif attr in ("depth_range", "duration_range", "link_scale"):
                    fields[attr] = tuple(float(v) for v in value.split(","))
                else:
                    raise ValueError(f"{path}: line {lineno}: unknown profile key {attr!r}")
            else:
                raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
    profiles = dict(DEFAULT_PROFILES)
    for fine, fields in overrides.items():
        profiles[fine] = replace(profiles[fine], **fields)
    config = GeneratorConfig(profiles=profiles, **scalars)
    return config, counts
