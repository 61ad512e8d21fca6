"""Acceptance suite: one test per criterion, one PASS line per criterion.

Benchmark thresholds (criterion 8) are regression fixtures tied to the
default generator profiles and seed; changing either requires a
CHANGELOG.md entry. Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import itertools
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.setrecursionlimit(100_000)

from radiofp.cli import main as cli_main
from radiofp.convnet import NetworkSpec, forward, init_params
from radiofp.domain import CoarseClass, FineClass, coarse_of, save_dataset
from radiofp.evaluation import (
    ConfusionMatrix,
    accuracy,
    accuracy_quotient,
    confusion,
    cross_validate,
    importance_report,
    kfold_split,
    link_ablation,
    sigma_from_fold_accuracies,
)
from radiofp.features import power_sums
from radiofp.kernel_svm import (
    decision_value,
    rbf_kernel,
    rbf_kernel_matrix,
    train_rbf,
)
from radiofp.linear_svm import objective, train_binary
from radiofp.pipelines import make_pipeline
from radiofp.random_forest import (
    Forest,
    TreeNode,
    grow_tree,
    mutual_information,
    predict_forest,
    predict_tree,
    train_forest,
)
from radiofp.synthgen import GeneratorConfig, generate
from radiofp.timewarp import dtw

from oracles import (
    dtw_recursive,
    info_gain_direct,
    rbf_kernel_direct,
    reference_linear_svm,
)
from test_convnet import numeric_gradients, randomized_params, relative_error, tiny_spec
from test_kernel_svm import full_alpha, kkt_gap


def passline(number, budget, elapsed, text):
    assert elapsed < budget, f"criterion {number} exceeded {budget}s ({elapsed:.1f}s)"
    print(f"\n[ACCEPTANCE] criterion {number:02d}: PASS ({elapsed:.1f}s) - {text}")


REL_TOL = 1e-9


def rel_close(a, b, tol=REL_TOL):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def test_criterion_01_formula_oracles():
    start = time.time()
    rng = np.random.default_rng(101)
    for _ in range(100):
        n = int(rng.integers(1, 60))
        # accuracy vs direct counting
        preds = rng.integers(1, 5, size=n)
        labels = rng.integers(1, 5, size=n)
        direct = sum(1 for p, l in zip(preds, labels) if p == l) / n
        assert rel_close(accuracy(preds, labels), direct)
        # fold-spread estimator vs its algebraic identity
        accs = rng.random(int(rng.integers(2, 12)))
        direct = math.sqrt(max(0.0, sum(a * a for a in accs) / len(accs) - (sum(accs) / len(accs)) ** 2))
        assert rel_close(sigma_from_fold_accuracies(accs), direct)
        # cross-entropy vs per-row average
        from radiofp.convnet import loss

        raw = rng.random((n, 4)) + 0.05
        probs = raw / raw.sum(axis=1, keepdims=True)
        y = rng.integers(0, 4, size=n)
        direct = sum(-math.log(probs[i, y[i]]) for i in range(n)) / n
        assert rel_close(loss(probs, y), direct)
        # RBF kernel vs direct formula
        a = rng.normal(size=8)
        b = rng.normal(size=8)
        gamma = float(rng.uniform(0.01, 2.0))
        assert rel_close(rbf_kernel(a, b, gamma), rbf_kernel_direct(a, b, gamma))
        # power sums vs plain summation
        series = rng.normal(-55.0, 5.0, size=int(rng.integers(4, 100)))
        mine = power_sums(series)
        for j in (1, 2, 3):
            assert rel_close(mine[j - 1], sum(float(v) ** j for v in series))
        # mutual information vs entropy arithmetic
        labels = rng.integers(0, 3, size=int(rng.integers(2, 30)))
        cut = int(rng.integers(1, labels.size))
        assert rel_close(
            mutual_information(labels[:cut], labels[cut:]),
            info_gain_direct(labels[:cut].tolist(), labels[cut:].tolist()),
        )
    passline(1, 10.0, time.time() - start, "six formula implementations match brute force on 100 instances each")


def test_criterion_02_dtw_exhaustive():
    start = time.time()
    series = [
        list(map(float, bits))
        for n in range(1, 7)
        for bits in itertools.product((0.0, 1.0), repeat=n)
    ]
    checked = 0
    for i in range(len(series)):
        for j in range(i, len(series)):
            assert dtw(series[i], series[j]) == dtw_recursive(series[i], series[j])
            checked += 1
    assert checked == 126 * 127 // 2
    passline(2, 60.0, time.time() - start, f"DP equals exhaustive recursion on all {checked} binary pairs up to length 6")


def test_criterion_03_linear_svm_optimality():
    start = time.time()
    rng = np.random.default_rng(103)
    for trial in range(20):
        n = int(rng.integers(10, 101))
        d = int(rng.integers(2, 21))
        X = rng.normal(size=(n, d))
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        if np.all(y > 0) or np.all(y < 0):
            y[0] = -y[0]
        reg = "l1" if trial % 2 else "l2"
        C = float(rng.uniform(0.2, 3.0))
        beta = train_binary(X, y, C=C, reg=reg)
        ref = reference_linear_svm(X, y, C, reg)
        mine = objective(beta, X, y, C, reg)
        target = objective(ref, X, y, C, reg)
        assert abs(mine - target) <= 1e-4 * target, f"trial {trial}: {mine} vs {target}"
    X = rng.normal(size=(50, 8))
    X[:, 3] = 0.0
    y = np.where(rng.random(50) < 0.5, 1.0, -1.0)
    beta = train_binary(X, y, C=1.0, reg="l1")
    assert beta[3] == 0.0
    passline(3, 60.0, time.time() - start, "20 instances within 1e-4 of the reference optimum; zero column stays exactly 0 under L1")


def test_criterion_04_kernel_svm():
    start = time.time()
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    part = train_rbf(X, y, C=10.0, gamma=1.0)
    assert np.array_equal(np.sign(decision_value(part, X, gamma=1.0)), y)

    rng = np.random.default_rng(104)
    for _ in range(10):
        n = int(rng.integers(15, 40))
        Xr = rng.normal(size=(n, 6))
        yr = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        if np.all(yr > 0) or np.all(yr < 0):
            yr[0] = -yr[0]
        C = float(rng.uniform(0.5, 10.0))
        gamma = float(rng.uniform(0.05, 1.0))
        trained = train_rbf(Xr, yr, C=C, gamma=gamma, tol=1e-3)
        assert np.all(trained.sv_alpha > 0.0)
        assert np.all(trained.sv_alpha <= C + 1e-12)
        K = rbf_kernel_matrix(Xr, Xr, gamma)
        assert kkt_gap(full_alpha(trained, n), K, yr, C) <= 1e-3 + 1e-9
        assert np.linalg.eigvalsh(K).min() >= -1e-8

    points = rng.normal(size=(50, 5))
    gram = rbf_kernel_matrix(points, points, 0.3)
    assert np.linalg.eigvalsh(gram).min() >= -1e-8
    passline(4, 60.0, time.time() - start, "XOR separated; box/KKT hold on 10 instances; Gram matrices PSD")


def test_criterion_05_forest():
    start = time.time()
    rng = np.random.default_rng(105)
    X = rng.normal(size=(60, 5))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.int64) + 1

    forest = train_forest(X, y, n_trees=1, max_features=None, bootstrap=False, seed=0)
    tree = grow_tree(X, y)
    probes = rng.normal(size=(40, 5))
    assert all(predict_forest(forest, p) == predict_tree(tree, p) for p in probes)

    Xc = rng.normal(size=(80, 4))
    yc = ((Xc[:, 0] > 0) ^ (Xc[:, 1] > 0)).astype(np.int64) + 1  # consistent, nonlinear
    full = grow_tree(Xc, yc, max_depth=None)
    assert all(predict_tree(full, row) == lab for row, lab in zip(Xc, yc))

    voted = train_forest(X, y, n_trees=9, seed=3)
    for p in probes[:20]:
        votes = [predict_tree(t, p) for t in voted.trees]
        tally = {}
        for v in votes:
            tally[v] = tally.get(v, 0) + 1
        top = max(tally.values())
        assert predict_forest(voted, p) == min(v for v, c in tally.items() if c == top)

    boundary = TreeNode(feature=0, threshold=1.25, left=TreeNode(klass=1), right=TreeNode(klass=2))
    assert predict_tree(boundary, np.array([1.25])) == 1
    assert predict_tree(boundary, np.array([1.25 + 1e-9])) == 2
    passline(5, 30.0, time.time() - start, "degenerate forest = tree; consistent data memorized; vote = tally; <= goes left")


def test_criterion_06_convnet():
    start = time.time()
    spec = tiny_spec()
    params = randomized_params(spec, seed=106)
    rng = np.random.default_rng(106)
    x = rng.normal(size=(4, 9, 50))
    labels = rng.integers(0, 3, size=4)
    from radiofp.convnet import backward

    analytic = backward(params, spec, x, labels)
    numeric = numeric_gradients(params, spec, x, labels)
    for name, grad in analytic.items():
        err = relative_error(grad, numeric[name]).max()
        assert err < 1e-4, f"{name}: {err:.2e}"

    default_spec = NetworkSpec(n_classes=9)
    assert default_spec.conv_out_width == 781

    probs = forward(init_params(default_spec, seed=1), default_spec, rng.normal(size=(3, 9, 800)))
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    passline(6, 120.0, time.time() - start, "all parameter gradients within 1e-4 of central differences; softmax rows sum to 1; conv width 781")


def test_criterion_07_cross_validation_laws():
    start = time.time()
    rng = np.random.default_rng(107)
    labels = rng.integers(0, 4, size=47)
    split = kfold_split(47, labels, k=6, seed=7)
    joined = np.concatenate(split.folds)
    assert len(joined) == 47 and len(np.unique(joined)) == 47
    for cls in range(4):
        sizes = [(labels[f] == cls).sum() for f in split.folds]
        assert max(sizes) - min(sizes) <= 1

    data = generate(
        GeneratorConfig(seed=7), {FineClass.PASSENGER_CAR: 12, FineClass.SEMI_TRUCK: 12}
    )
    pipeline = make_pipeline("l2l2_svm", task="coarse", features="reduced")
    report = cross_validate(pipeline, data, k=6, seed=7)
    assert report.acc_k == float(np.mean(report.fold_accuracies))
    digests = report.fold_scaler_digests
    assert len(set(digests)) == len(digests)  # per-fold statistics all differ
    passline(7, 10.0, time.time() - start, "folds partition; stratified counts within 1; ACC_k = fold mean; no scaler leakage")


BINARY_COUNTS = {
    c: (40 if coarse_of(c) is CoarseClass.CAR_LIKE else 50) for c in FineClass
}
FINE_COUNTS = {c: 60 for c in FineClass}

# Regression fixtures for the documented default generator at seed 42.
# Any change here requires a CHANGELOG.md entry.
BINARY_RBF_THRESHOLD = 0.95
BINARY_ALL_FAMILIES_THRESHOLD = 0.85
FINE_RBF_THRESHOLD = 0.70


@pytest.fixture(scope="module")
def binary_benchmark():
    return generate(GeneratorConfig(seed=42), BINARY_COUNTS)


def test_criterion_08_synthetic_benchmark(binary_benchmark):
    start = time.time()
    results = {}
    rbf = make_pipeline(
        "rbf_svm", task="coarse", features="reduced", hyper={"C": 10.0, "gamma": 1e-2}
    )
    results["rbf_svm"] = cross_validate(rbf, binary_benchmark, k=10, seed=42).acc_k
    assert results["rbf_svm"] >= BINARY_RBF_THRESHOLD

    for model, kwargs in (
        ("l1l2_svm", {"features": "reduced"}),
        ("l2l2_svm", {"features": "reduced"}),
        ("forest", {"features": "reduced"}),
        ("convnet", {"hyper": {"epochs": 8}}),
    ):
        pipeline = make_pipeline(model, task="coarse", **kwargs)
        results[model] = cross_validate(pipeline, binary_benchmark, k=10, seed=42).acc_k
    for model, acc in results.items():
        assert acc >= BINARY_ALL_FAMILIES_THRESHOLD, f"{model}: {acc:.4f}"

    fine_data = generate(GeneratorConfig(seed=42), FINE_COUNTS)
    fine_pipeline = make_pipeline("rbf_svm", task="fine", features="reduced")
    fine_acc = cross_validate(fine_pipeline, fine_data, k=10, seed=42).acc_k
    assert fine_acc >= FINE_RBF_THRESHOLD, f"fine-grained RBF: {fine_acc:.4f}"

    summary = ", ".join(f"{m}={a:.3f}" for m, a in results.items())
    passline(8, 900.0, time.time() - start, f"binary {summary}; fine rbf={fine_acc:.3f}")


def test_criterion_09_structural_reproductions(binary_benchmark):
    start = time.time()
    # importance table: 9 x 9, per-link column sums in {0, 1}
    fine_small = generate(GeneratorConfig(seed=9), {c: 6 for c in FineClass})
    from radiofp.evaluation import apply_scaler_for, dataset_labels, featurize, fit_scaler_for

    pipeline = make_pipeline("l1l2_svm", task="fine", features="raw")
    X = featurize(fine_small, "raw", pipeline.links)
    scaler = fit_scaler_for("raw", X)
    model = pipeline.fit(apply_scaler_for("raw", scaler, X), dataset_labels(fine_small, "fine"), 0)
    table = importance_report(model)
    assert table.shape == (9, 9)
    for s in table.sum(axis=0):
        assert s == 0.0 or abs(s - 1.0) <= 1e-9

    # ablation table over the canonical subsets, with raw dimensions
    subset_data = binary_benchmark.subset(range(0, len(binary_benchmark), 10))
    canonical = [(1,), (5,), (9,), (1, 5, 9), (3, 7), tuple(range(1, 10))]

    def factory(links):
        return make_pipeline("l2l2_svm", task="coarse", features="raw", links=links)

    rows = link_ablation(factory, subset_data, canonical, k=2, seed=9)
    assert [row["links"] for row in rows] == canonical
    assert [row["dim"] for row in rows] == [800, 800, 800, 2400, 1600, 7200]

    # accuracy quotient: >= recall everywhere, and 1.0 for a perfect classifier
    rng = np.random.default_rng(109)
    counts = rng.integers(0, 25, size=(9, 9)).astype(np.int64)
    conf = ConfusionMatrix(counts=counts, class_order=tuple(c.value for c in FineClass))
    quotients = accuracy_quotient(conf)
    for i, cls in enumerate(FineClass):
        if counts[i].sum():
            assert quotients[cls] >= counts[i, i] / counts[i].sum() - 1e-12
    perfect = ConfusionMatrix(
        counts=np.diag(np.arange(1, 10)), class_order=tuple(c.value for c in FineClass)
    )
    assert all(q == 1.0 for q in accuracy_quotient(perfect).values())
    passline(9, 300.0, time.time() - start, "importance 9x9 with unit link columns; canonical ablation dims; quotient laws")


def test_criterion_10_cli_determinism(tmp_path):
    start = time.time()
    gen_cfg = tmp_path / "gen.cfg"
    gen_cfg.write_text(
        "seed = 11\n"
        "count.passenger_car = 8\ncount.van = 8\ncount.truck = 8\ncount.semi_truck = 8\n"
    )
    data_dir = tmp_path / "data"
    assert cli_main(["generate", "--gen-config", str(gen_cfg), "--out", str(data_dir)]) == 0
    data_dir2 = tmp_path / "data2"
    assert cli_main(["generate", "--gen-config", str(gen_cfg), "--out", str(data_dir2)]) == 0
    assert (data_dir / "dataset.jsonl").read_bytes() == (data_dir2 / "dataset.jsonl").read_bytes()
    dataset = str(data_dir / "dataset.jsonl")

    def run(command, out, jobs):
        args = {
            "evaluate": [
                "evaluate", "--dataset", dataset, "--model", "rbf_svm", "--features",
                "reduced", "--task", "coarse", "--k", "4", "--seed", "5",
            ],
            "ablate": [
                "ablate", "--dataset", dataset, "--model", "l2l2_svm", "--task",
                "coarse", "--k", "2", "--seed", "5", "--subsets", "1;3,7",
            ],
            "dtw": ["dtw", "--dataset", dataset, "--link", "1"],
            "importance": [
                "importance", "--dataset", dataset, "--task", "coarse", "--seed", "5",
            ],
        }[command]
        assert cli_main(args + ["--jobs", str(jobs), "--out", str(out)]) == 0
        blobs = []
        for path in sorted(Path(out).glob("*")):
            if path.suffix in (".json", ".csv") and path.name != "manifest.json":
                blobs.append((path.name, path.read_bytes()))
        return blobs

    for command in ("evaluate", "ablate", "dtw", "importance"):
        first = run(command, tmp_path / f"{command}-j1", jobs=1)
        again = run(command, tmp_path / f"{command}-j1b", jobs=1)
        parallel = run(command, tmp_path / f"{command}-j8", jobs=8)
        assert first == again, f"{command}: rerun differs"
        assert first == parallel, f"{command}: --jobs 8 differs"
    passline(10, 900.0, time.time() - start, "generate/evaluate/ablate/dtw/importance byte-identical across reruns and --jobs 1 vs 8")
