"""
Cutting passages out of a continuous RSSI stream
================================================

Deployed receivers report a continuous sample stream, not pre-cut
records. The segmenter watches the direct links for sustained drops
below the baseline and emits one 800-sample window per passage, padding
with the baseline at stream edges.
"""

import numpy as np

from radiofp import GeneratorConfig, generate, segment_stream
from radiofp.domain import FineClass

# splice three generated passages into one long noisy stream
config = GeneratorConfig(seed=17, noise_std=0.8)
passages = generate(
    config, {FineClass.PASSENGER_CAR: 1, FineClass.TRUCK: 1, FineClass.SEMI_TRUCK: 1}
)
rng = np.random.default_rng(17)
stream = config.baseline_rssi + rng.normal(0.0, config.noise_std, size=(9, 5000))
for k, record in enumerate(passages):
    offset = 600 + k * 1500
    stream[:, offset : offset + 800] = record.series

# threshold below the shallowest class's dip depth (6 dB), well above noise
windows = segment_stream(
    stream, baseline=config.baseline_rssi, drop_threshold=5.0, min_drop_len=10
)
print(f"stream of {stream.shape[1]} samples -> {len(windows)} windows")
for k, window in enumerate(windows):
    print(
        f"window {k}: shape {window.shape}, deepest point {window.min():.1f} dBm "
        f"(true class: {passages[k].fine.canonical_name})"
    )
print("\neach window is Fingerprint-shaped and ready for feature extraction")
