import numpy as np
import pytest

from radiofp.domain import CoarseClass, FineClass
from radiofp.evaluation import (
    ConfusionMatrix,
    FoldSplit,
    Pipeline,
    accuracy,
    accuracy_quotient,
    confusion,
    cross_validate,
    importance_report,
    kfold_split,
    link_ablation,
    sigma_from_fold_accuracies,
    write_ablation_csv,
    write_confusion_csv,
)
from radiofp.features import FeatureLayout
from radiofp.linear_svm import LinearModel
from radiofp.pipelines import make_pipeline
from radiofp.synthgen import GeneratorConfig, generate


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_two_thirds(self):
        assert accuracy([1, 1, 2], [1, 2, 2]) == pytest.approx(2 / 3)

    def test_matches_counting_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = rng.integers(1, 50)
            preds = rng.integers(1, 4, size=n)
            labels = rng.integers(1, 4, size=n)
            expected = sum(1 for p, l in zip(preds, labels) if p == l) / n
            assert accuracy(preds, labels) == pytest.approx(expected, rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            accuracy([], [])
        with pytest.raises(ValueError):
            accuracy([1, 2], [1])


class TestKfoldSplit:
    def test_ten_singleton_folds(self):
        split = kfold_split(10, np.zeros(10), k=10, seed=0)
        assert split.k == 10
        assert all(len(f) == 1 for f in split.folds)

    def test_partition_laws(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(10, 60))
            k = int(rng.integers(2, min(n, 8)))
            labels = rng.integers(0, 3, size=n)
            for stratified in (True, False):
                split = kfold_split(n, labels, k, seed=int(rng.integers(100)), stratified=stratified)
                everything = np.concatenate(split.folds)
                assert len(everything) == n
                assert len(np.unique(everything)) == n

    def test_stratified_balanced_classes(self):
        labels = np.array([0] * 10 + [1] * 10)
        split = kfold_split(20, labels, k=5, seed=3)
        for fold in split.folds:
            fold_labels = labels[fold]
            assert (fold_labels == 0).sum() == 2
            assert (fold_labels == 1).sum() == 2

    def test_small_class_spread_over_its_member_count(self):
        labels = np.array([0] * 17 + [1] * 3)
        split = kfold_split(20, labels, k=10, seed=4)
        folds_with_rare = sum(1 for fold in split.folds if (labels[fold] == 1).any())
        assert folds_with_rare == 3

    def test_per_class_fold_sizes_differ_by_at_most_one(self):
        rng = np.random.default_rng(5)
        labels = rng.integers(0, 4, size=53)
        split = kfold_split(53, labels, k=7, seed=6)
        for cls in range(4):
            sizes = [(labels[fold] == cls).sum() for fold in split.folds]
            assert max(sizes) - min(sizes) <= 1

    def test_deterministic_per_seed(self):
        labels = np.random.default_rng(7).integers(0, 3, size=30)
        a = kfold_split(30, labels, k=5, seed=42)
        b = kfold_split(30, labels, k=5, seed=42)
        for fa, fb in zip(a.folds, b.folds):
            assert np.array_equal(fa, fb)

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            kfold_split(5, np.zeros(5), k=6)
        with pytest.raises(ValueError):
            kfold_split(5, np.zeros(5), k=1)

    def test_fold_split_validation(self):
        with pytest.raises(ValueError, match="overlap"):
            FoldSplit(folds=(np.array([0, 1]), np.array([1, 2])))
        with pytest.raises(ValueError, match="empty"):
            FoldSplit(folds=(np.array([0]), np.array([], dtype=int)))


class TestConfusion:
    def test_perfect_predictions_diagonal(self):
        conf = confusion([1, 2, 3, 1], [1, 2, 3, 1], class_order=(1, 2, 3))
        assert np.array_equal(np.diag(conf.counts), [2, 1, 1])
        assert conf.counts.sum() == np.trace(conf.counts)
        norm = conf.normalized()
        assert np.array_equal(norm, np.eye(3))

    def test_single_column_when_constant(self):
        conf = confusion([1, 1, 1], [1, 2, 3], class_order=(1, 2, 3))
        assert np.array_equal(conf.counts[:, 0], [1, 1, 1])
        assert conf.counts[:, 1:].sum() == 0

    def test_trace_identity(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n = int(rng.integers(5, 40))
            preds = rng.integers(1, 4, size=n)
            labels = rng.integers(1, 4, size=n)
            conf = confusion(preds, labels, class_order=(1, 2, 3))
            assert conf.trace_accuracy() == pytest.approx(accuracy(preds, labels), rel=1e-12)

    def test_unknown_class_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            confusion([4], [1], class_order=(1, 2, 3))

    def test_normalized_rows_sum_to_one(self):
        conf = confusion([1, 2, 2], [1, 1, 2], class_order=(1, 2, 3))
        norm = conf.normalized()
        sums = norm.sum(axis=1)
        assert sums[0] == pytest.approx(1.0, abs=1e-9)
        assert sums[1] == pytest.approx(1.0, abs=1e-9)
        assert sums[2] == 0.0  # empty row stays zero


class TestAccuracyQuotient:
    def _matrix_like_field_study(self):
        """Fine confusion with realistic cross-class leakage patterns."""
        counts = np.zeros((9, 9), dtype=np.int64)
        counts[0, 0] = 1528  # passenger car: everything stays car-like
        counts[1, 1] = 10  # passenger car with trailer: 15/19 stay car-like
        counts[1, 0] = 5
        counts[1, 6] = 4
        for i in (2, 3, 4):  # suv, minivan, van predicted within car-like
            counts[i, 0] = [0, 0, 93, 128, 172][i]
        counts[5, 5] = 75
        counts[6, 5] = 20  # truck with trailer: all predictions truck-like
        counts[6, 6] = 32
        counts[7, 8] = 5
        counts[8, 8] = 563
        return ConfusionMatrix(counts=counts, class_order=tuple(c.value for c in FineClass))

    def test_known_quotient_values(self):
        # trailer-class leakage into the other coarse group caps its quotient;
        # classes that only leak within their own group keep 1.00
        quotients = accuracy_quotient(self._matrix_like_field_study())
        assert quotients[FineClass.PASSENGER_CAR] == pytest.approx(1.00, abs=5e-3)
        assert quotients[FineClass.PASSENGER_CAR_WITH_TRAILER] == pytest.approx(0.79, abs=5e-3)
        assert quotients[FineClass.TRUCK_WITH_TRAILER] == pytest.approx(1.00, abs=5e-3)

    def test_perfect_classifier_all_ones(self):
        counts = np.diag([FineClass(i).value * 3 for i in range(1, 10)])
        conf = ConfusionMatrix(counts=counts, class_order=tuple(c.value for c in FineClass))
        quotients = accuracy_quotient(conf)
        assert all(q == 1.0 for q in quotients.values())

    def test_quotient_at_least_recall(self):
        rng = np.random.default_rng(9)
        counts = rng.integers(0, 20, size=(9, 9)).astype(np.int64)
        conf = ConfusionMatrix(counts=counts, class_order=tuple(c.value for c in FineClass))
        quotients = accuracy_quotient(conf)
        for i, cls in enumerate(FineClass):
            recall = counts[i, i] / counts[i].sum()
            assert quotients[cls] >= recall - 1e-12

    def test_empty_row_absent(self):
        counts = np.zeros((9, 9), dtype=np.int64)
        counts[0, 0] = 5
        conf = ConfusionMatrix(counts=counts, class_order=tuple(c.value for c in FineClass))
        quotients = accuracy_quotient(conf)
        assert FineClass.PASSENGER_CAR in quotients
        assert FineClass.BUS not in quotients


def constant_pipeline():
    """Predicts the training-fold majority class everywhere."""

    def fit(X, y, seed):
        values, counts = np.unique(y, return_counts=True)
        return int(values[np.argmax(counts)])

    return Pipeline(
        name="constant",
        task="coarse",
        feature_kind="reduced",
        links=(1,),
        standardize=True,
        fit=fit,
        predict=lambda model, X: np.full(X.shape[0], model),
    )


def tagged_dataset(counts, seed=0, noise=1.0):
    return generate(GeneratorConfig(seed=seed, noise_std=noise), counts)


class TestCrossValidate:
    def test_perfect_trainer_sigma_zero(self):
        data = tagged_dataset({FineClass.PASSENGER_CAR: 10, FineClass.SEMI_TRUCK: 10})
        report = cross_validate(
            Pipeline(
                name="threshold-rule",
                task="coarse",
                feature_kind="reduced",
                links=(1,),
                standardize=False,
                # min1 value (column 1) separates the coarse classes cleanly
                fit=lambda X, y, seed: None,
                predict=lambda model, X: np.where(X[:, 1] > -60.0, 1, 2),
            ),
            data,
            k=5,
            seed=1,
        )
        assert report.acc_k == 1.0
        assert report.sigma_acc == 0.0
        assert report.fold_accuracies == [1.0] * 5

    def test_sigma_formula_direct(self):
        assert sigma_from_fold_accuracies([1.0] * 10) == 0.0
        assert sigma_from_fold_accuracies([0.8, 1.0]) == pytest.approx(0.1, rel=1e-12)

    def test_acc_k_is_mean_of_folds(self):
        data = tagged_dataset({FineClass.PASSENGER_CAR: 12, FineClass.SEMI_TRUCK: 8})
        report = cross_validate(constant_pipeline(), data, k=4, seed=2)
        assert report.acc_k == pytest.approx(np.mean(report.fold_accuracies), abs=1e-12)

    def test_constant_trainer_matches_prevalence(self):
        data = tagged_dataset({FineClass.PASSENGER_CAR: 14, FineClass.SEMI_TRUCK: 6})
        k = 5
        report = cross_validate(constant_pipeline(), data, k=k, seed=3)
        labels = data.coarse_labels()
        split = kfold_split(len(data), labels, k, seed=3, stratified=True)
        prevalence = [ (labels[fold] == 1).mean() for fold in split.folds ]
        assert report.fold_accuracies == pytest.approx(prevalence)

    def test_no_scaler_leakage(self):
        data = tagged_dataset({FineClass.PASSENGER_CAR: 6, FineClass.SEMI_TRUCK: 6}, seed=5)
        report = cross_validate(constant_pipeline(), data, k=3, seed=4)
        digests = report.fold_scaler_digests
        assert len(set(digests)) == 3  # per-fold statistics differ

    def test_small_class_skipped_with_warning(self):
        data = tagged_dataset(
            {FineClass.PASSENGER_CAR: 8, FineClass.SEMI_TRUCK: 8, FineClass.BUS: 1}
        )
        pipeline = make_pipeline("forest", task="fine", features="reduced", hyper={"n_trees": 3})
        with pytest.warns(UserWarning, match="skipping"):
            report = cross_validate(pipeline, data, k=4, seed=5)
        assert report.config["skipped_classes"] == [8]
        assert report.config["n_records"] == 16

    def test_jobs_do_not_change_results(self):
        data = tagged_dataset({FineClass.PASSENGER_CAR: 10, FineClass.SEMI_TRUCK: 10})
        pipeline = make_pipeline("forest", task="coarse", features="reduced", hyper={"n_trees": 5})
        a = cross_validate(pipeline, data, k=4, seed=6, jobs=1)
        b = cross_validate(pipeline, data, k=4, seed=6, jobs=4)
        assert a.fold_accuracies == b.fold_accuracies
        assert np.array_equal(a.confusion.counts, b.confusion.counts)

    def test_fine_task_reports_coarse_matrix_and_quotients(self):
        data = tagged_dataset({c: 4 for c in FineClass}, noise=0.3)
        pipeline = make_pipeline("forest", task="fine", features="reduced", hyper={"n_trees": 10})
        report = cross_validate(pipeline, data, k=3, seed=7)
        assert report.confusion.counts.shape == (9, 9)
        assert report.confusion_coarse is not None
        assert report.confusion_coarse.counts.sum() == report.confusion.counts.sum()
        assert report.accuracy_quotients is not None
        for cls, q in report.accuracy_quotients.items():
            i = cls.value - 1
            recall = report.confusion.normalized()[i, i]
            assert q >= recall - 1e-12

    def test_coarse_at_least_fine_when_mapped(self):
        data = tagged_dataset({c: 4 for c in FineClass}, noise=0.5, seed=9)
        pipeline = make_pipeline("forest", task="fine", features="reduced", hyper={"n_trees": 10})
        report = cross_validate(pipeline, data, k=3, seed=8)
        fine_acc = report.confusion.trace_accuracy()
        coarse_acc = report.confusion_coarse.trace_accuracy()
        assert coarse_acc >= fine_acc - 1e-12


class TestLinkAblation:
    def test_structure(self):
        data = tagged_dataset({FineClass.PASSENGER_CAR: 8, FineClass.SEMI_TRUCK: 8})

        def factory(links):
            return make_pipeline("l2l2_svm", task="coarse", features="raw", links=links)

        subsets = [(1,), (1, 5), (3, 7)]
        rows = link_ablation(factory, data, subsets, k=2, seed=10)
        assert len(rows) == 3
        assert [r["dim"] for r in rows] == [800, 1600, 1600]
        for row in rows:
            assert 0.0 <= row["acc_k"] <= 1.0
            assert row["sigma_acc"] >= 0.0

    def test_more_links_no_worse_on_noise_free_data(self):
        data = tagged_dataset(
            {FineClass.PASSENGER_CAR: 8, FineClass.SEMI_TRUCK: 8}, noise=0.0, seed=12
        )

        def factory(links):
            return make_pipeline("l2l2_svm", task="coarse", features="raw", links=links)

        rows = link_ablation(factory, data, [(1,), (1, 5, 9)], k=2, seed=12)
        single, direct = rows
        assert direct["acc_k"] >= single["acc_k"] - single["sigma_acc"]

    def test_empty_subset_rejected(self):
        data = tagged_dataset({FineClass.PASSENGER_CAR: 4, FineClass.SEMI_TRUCK: 4})
        with pytest.raises(ValueError):
            link_ablation(lambda links: None, data, [()], k=2, seed=0)


class TestImportanceReport:
    def _model(self, betas):
        return LinearModel(
            classes=tuple(FineClass),
            betas=betas,
            reg="l1",
            C=1.0,
            layout=FeatureLayout("raw"),
        )

    def test_all_zero_model_flagged_as_zero_table(self):
        table = importance_report(self._model(np.zeros((9, 7200))))
        assert np.all(table == 0.0)

    def test_single_cell_normalizes_to_one(self):
        betas = np.zeros((9, 7200))
        betas[4, 2 * 800 + 10] = 3.0
        table = importance_report(self._model(betas))
        assert table[4, 2] == 1.0
        assert table.sum() == 1.0

    def test_column_sums_zero_or_one(self):
        rng = np.random.default_rng(11)
        betas = rng.normal(size=(9, 7200)) * (rng.random((9, 7200)) < 0.01)
        betas[:, 5 * 800 : 6 * 800] = 0.0  # link 6 unused
        table = importance_report(self._model(betas))
        sums = table.sum(axis=0)
        for s in sums:
            assert s == pytest.approx(1.0, abs=1e-9) or s == 0.0
        assert sums[5] == 0.0

    def test_l2_model_rejected(self):
        model = LinearModel(
            classes=tuple(FineClass),
            betas=np.zeros((9, 7200)),
            reg="l2",
            C=1.0,
            layout=FeatureLayout("raw"),
        )
        with pytest.raises(ValueError, match="L1"):
            importance_report(model)


class TestCsvWriters:
    def test_confusion_csv(self, tmp_path):
        conf = confusion([1, 2, 2], [1, 2, 1], class_order=(1, 2))
        path = tmp_path / "conf.csv"
        write_confusion_csv(conf, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("true")
        assert len(lines) == 3

    def test_ablation_csv(self, tmp_path):
        rows = [{"links": (1, 5, 9), "dim": 2400, "acc_k": 0.5, "sigma_acc": 0.1}]
        path = tmp_path / "abl.csv"
        write_ablation_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[1].split(",")[0] == "1+5+9"
