"""
Raw and reduced feature pipelines
=================================

Raw features stack all selected links into one long vector (7200-dim for
nine links). Reduced features compress each link to 15 numbers: top-3
minima and maxima with their positions, plus three power sums. A fitted
scaler standardizes columns using training data only.
"""

import numpy as np

from radiofp import FineClass, GeneratorConfig, generate, raw_features, reduced_features
from radiofp.features import reduced_feature_names, standardize_apply, standardize_fit

dataset = generate(GeneratorConfig(seed=3), {FineClass.PASSENGER_CAR: 4, FineClass.BUS: 4})

record = dataset[0]
print(f"record {record.id!r}")
print(f"  raw, all nine links : {raw_features(record).shape[0]} values")
print(f"  raw, direct links   : {raw_features(record, links={1, 5, 9}).shape[0]} values")
print(f"  reduced, all links  : {reduced_features(record).shape[0]} values")

# the reduced block of link 5, annotated
names = reduced_feature_names(links={5})
values = reduced_features(record, links={5})
print("\nreduced features of link 5:")
for name, value in zip(names, values):
    print(f"  {name:16s} {value:16.3f}")

# scaling: fit on one half, apply to the other; no test-set leakage
X = np.array([reduced_features(r) for r in dataset])
scaler = standardize_fit(X[:4])
Z = standardize_apply(scaler, X[4:])
print(f"\nscaler fitted on 4 records, applied to {Z.shape[0]} held-out rows")
print(f"held-out standardized value range: [{Z.min():.2f}, {Z.max():.2f}]")
