"""Cross-validation, hold-out evaluation and the classifier benchmark.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from edp.classifiers import Model, resolve_algorithm, train
from edp.errors import ConfigError
from edp.features import Dataset, label_sort_key

logger = logging.getLogger(__name__)

Z_95 = 1.96


def ci95(values: Sequence[float]) -> float:
    """Half width of the normal 95% confidence interval of the mean.

    Zero for fewer than two values.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(Z_95 * values.std(ddof=1) / math.sqrt(values.size))


@dataclass
class EvalReport:
    """Outcome of evaluating one algorithm on one dataset.

    Attributes
    ----------
    algorithm : str
    classes : tuple[str]
        Row and column order of `confusion`.
    confusion : np.ndarray
        confusion[true, predicted], summed over folds.
    fold_accuracies : list[float]
        One value per fold (a single value for hold-out evaluation).
    train_wall_s, test_wall_s : float
        Summed over folds.
    model_size : float
        Mean model size over folds.
    """

    algorithm: str
    classes: tuple
    confusion: np.ndarray
    fold_accuracies: list = field(default_factory=list)
    train_wall_s: float = 0.0
    test_wall_s: float = 0.0
    model_size: float = 0.0

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else 0.0

    @property
    def precision(self) -> dict[str, float]:
        predicted = self.confusion.sum(axis=0)
        return {
            label: float(self.confusion[i, i] / predicted[i]) if predicted[i] else 0.0
            for i, label in enumerate(self.classes)
        }

    @property
    def recall(self) -> dict[str, float]:
        actual = self.confusion.sum(axis=1)
        return {
            label: float(self.confusion[i, i] / actual[i]) if actual[i] else 0.0
            for i, label in enumerate(self.classes)
        }

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "accuracy": self.accuracy,
            "classes": list(self.classes),
            "confusion": self.confusion.tolist(),
            "precision": self.precision,
            "recall": self.recall,
            "fold_accuracies": list(self.fold_accuracies),
            "train_wall_s": self.train_wall_s,
            "test_wall_s": self.test_wall_s,
            "model_size": self.model_size,
        }


def stratified_folds(y: np.ndarray, k_folds: int, seed: int) -> list[np.ndarray]:
    """Partition row indices into `k_folds` stratified folds.

    Rows are shuffled with `seed`, grouped by class (class order), and dealt
    round-robin over the folds with one counter shared by all classes, so
    fold sizes differ by at most one overall and per class.
    """
    y = np.asarray(y)
    order = np.random.default_rng(seed).permutation(y.size)
    assignment = np.empty(y.size, dtype=np.int64)
    counter = 0
    for label in np.unique(y):
        members = order[y[order] == label]
        assignment[members] = (counter + np.arange(members.size)) % k_folds
        counter += members.size
    return [np.sort(np.flatnonzero(assignment == f)) for f in range(k_folds)]


def _confusion(classes, truth: Sequence[str], predicted: Sequence[str]) -> np.ndarray:
    index = {label: i for i, label in enumerate(classes)}
    matrix = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for actual, guess in zip(truth, predicted):
        matrix[index[actual], index[guess]] += 1
    return matrix


def cross_validate(
    alg: str,
    dataset: Dataset,
    k_folds: int = 10,
    hyperparams: Union[dict, None] = None,
    seed: int = 0,
) -> EvalReport:
    """Stratified k-fold cross-validation of one algorithm.

    Normalization statistics are refitted on every training split; the
    confusion matrix is accumulated over the folds.
    """
    alg = resolve_algorithm(alg)
    if not isinstance(k_folds, int) or k_folds < 2:
        raise ConfigError("folds", f"must be an integer >= 2, got {k_folds!r}")
    if len(dataset) < k_folds:
        raise ConfigError(
            "folds", f"{len(dataset)} instances cannot fill {k_folds} folds"
        )
    folds = stratified_folds(dataset.y, k_folds, seed)
    confusion = np.zeros((len(dataset.classes),) * 2, dtype=np.int64)
    fold_accuracies = []
    sizes = []
    train_wall_s = 0.0
    test_wall_s = 0.0
    everything = np.arange(len(dataset))
    for fold, test_rows in enumerate(folds):
        train_rows = np.setdiff1d(everything, test_rows, assume_unique=True)
        training = dataset.subset(train_rows)
        held_out = dataset.subset(test_rows, refit=False)
        start = time.perf_counter()
        model = train(alg, training, hyperparams)
        train_wall_s += time.perf_counter() - start
        start = time.perf_counter()
        predicted, _ = model.predict_dataset(held_out)
        test_wall_s += time.perf_counter() - start
        matrix = _confusion(dataset.classes, held_out.labels, predicted)
        confusion += matrix
        fold_accuracies.append(float(np.trace(matrix) / matrix.sum()))
        sizes.append(model.size())
        logger.debug("%s fold %d: accuracy %.4f", alg, fold, fold_accuracies[-1])
    report = EvalReport(
        alg, dataset.classes, confusion, fold_accuracies,
        train_wall_s, test_wall_s, float(np.mean(sizes)),
    )
    logger.info("%s %d-fold accuracy %.4f", alg, k_folds, report.accuracy)
    return report


def evaluate(model: Model, dataset: Dataset) -> EvalReport:
    """Hold-out evaluation of a trained model on `dataset`."""
    classes = tuple(
        sorted(set(model.classes) | set(dataset.classes), key=label_sort_key)
    )
    start = time.perf_counter()
    predicted, _ = model.predict_dataset(dataset)
    test_wall_s = time.perf_counter() - start
    confusion = _confusion(classes, dataset.labels, predicted)
    report = EvalReport(
        model.algorithm, classes, confusion, [], 0.0, test_wall_s,
        float(model.size()),
    )
    report.fold_accuracies.append(report.accuracy)
    return report


@dataclass
class BenchRow:
    """Per-repetition measurements of one algorithm."""

    algorithm: str
    accuracies: list = field(default_factory=list)
    train_s: list = field(default_factory=list)
    test_s: list = field(default_factory=list)
    model_sizes: list = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def ci95_accuracy(self) -> float:
        return ci95(self.accuracies)

    @property
    def mean_train_s(self) -> float:
        return float(np.mean(self.train_s))

    @property
    def mean_test_s(self) -> float:
        return float(np.mean(self.test_s))

    @property
    def ci95_time(self) -> float:
        """CI of the total (train + test) wall time of a repetition."""
        return ci95(np.add(self.train_s, self.test_s))

    @property
    def mean_model_size(self) -> float:
        return float(np.mean(self.model_sizes))

    @property
    def ci95_model_size(self) -> float:
        return ci95(self.model_sizes)


@dataclass
class BenchReport:
    repetitions: int
    k_folds: int
    seed: int
    instances: int
    rows: list = field(default_factory=list)

    def row(self, algorithm: str) -> BenchRow:
        for row in self.rows:
            if row.algorithm == algorithm:
                return row
        raise KeyError(algorithm)

    def to_dict(self) -> dict:
        return {
            "kind": "bench",
            "repetitions": self.repetitions,
            "folds": self.k_folds,
            "seed": self.seed,
            "instances": self.instances,
            "algorithms": [
                {
                    "algorithm": row.algorithm,
                    "accuracies": row.accuracies,
                    "train_s": row.train_s,
                    "test_s": row.test_s,
                    "model_sizes": row.model_sizes,
                }
                for row in self.rows
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BenchReport":
        report = cls(
            data["repetitions"], data["folds"], data["seed"], data["instances"]
        )
        for entry in data["algorithms"]:
            report.rows.append(
                BenchRow(
                    entry["algorithm"], list(entry["accuracies"]),
                    list(entry["train_s"]), list(entry["test_s"]),
                    list(entry["model_sizes"]),
                )
            )
        return report


def benchmark(
    algorithms: Sequence[str],
    dataset: Dataset,
    repetitions: int = 5,
    seed: int = 0,
    k_folds: int = 10,
    hyperparams: Union[dict, None] = None,
) -> BenchReport:
    """Repeat cross-validation of every algorithm with distinct fold seeds.

    Repetition r uses fold seed `seed + r` for every algorithm, so all
    algorithms see the same partitions.

    Parameters
    ----------
    hyperparams : dict or None
        Per-algorithm overrides, keyed by canonical algorithm name.
    """
    if not isinstance(repetitions, int) or repetitions < 1:
        raise ConfigError("reps", f"must be an integer >= 1, got {repetitions!r}")
    report = BenchReport(repetitions, k_folds, seed, len(dataset))
    for alg in algorithms:
        alg = resolve_algorithm(alg)
        row = BenchRow(alg)
        for repetition in range(repetitions):
            result = cross_validate(
                alg, dataset, k_folds, (hyperparams or {}).get(alg), seed + repetition
            )
            row.accuracies.append(result.accuracy)
            row.train_s.append(result.train_wall_s)
            row.test_s.append(result.test_wall_s)
            row.model_sizes.append(result.model_size)
        logger.info(
            "bench %s: accuracy %.4f +- %.4f over %d repetitions",
            alg, row.mean_accuracy, row.ci95_accuracy, repetitions,
        )
        report.rows.append(row)
    return report
