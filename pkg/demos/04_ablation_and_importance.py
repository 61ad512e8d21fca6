"""
Which radio links carry the signal?
===================================

Two complementary views. The ablation retrains the classifier on subsets
of links and watches the accuracy; the importance table trains one sparse
L1 model on everything and counts the surviving non-zero weights per
(class, link) cell, normalized per link.
"""

from radiofp import FineClass, GeneratorConfig, generate, importance_report, link_ablation, make_pipeline
from radiofp.evaluation import apply_scaler_for, dataset_labels, featurize, fit_scaler_for

dataset = generate(GeneratorConfig(seed=5), {c: 6 for c in FineClass})

# --- ablation over canonical subsets (direct links, long diagonals, all)
subsets = [(1,), (5,), (9,), (1, 5, 9), (3, 7), tuple(range(1, 10))]


def factory(links):
    return make_pipeline("rbf_svm", task="coarse", features="raw", links=links)


print("link ablation, binary task (raw features):")
print(f"{'links':24s} {'dim':>6s} {'ACC_3':>7s} {'sigma':>7s}")
for row in link_ablation(factory, dataset, subsets, k=3, seed=5):
    links_text = ",".join(str(l) for l in row["links"])
    print(f"{links_text:24s} {row['dim']:6d} {row['acc_k']:7.3f} {row['sigma_acc']:7.3f}")

# --- sparse-model importance on the whole dataset (fine task)
pipeline = make_pipeline("l1l2_svm", task="fine", features="raw")
X = featurize(dataset, "raw", pipeline.links)
scaler = fit_scaler_for("raw", X)
model = pipeline.fit(apply_scaler_for("raw", scaler, X), dataset_labels(dataset, "fine"), 0)
table = importance_report(model)

print("\nrelative link importance per class (columns sum to 1):")
header = " ".join(f"phi{l}" for l in range(1, 10))
print(f"{'class':28s} {header}")
for cls, row in zip(FineClass, table):
    cells = " ".join(f"{v:4.2f}" for v in row)
    print(f"{cls.canonical_name:28s} {cells}")
