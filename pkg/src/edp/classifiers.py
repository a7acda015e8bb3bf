"""Service-usage classifiers: ZeroR, NaiveBayes, KNN and DecisionTree.

All models share one contract: they are immutable once trained, predict a
label and a class distribution for any instance of their schema, and break
every tie deterministically (lowest training index, lowest label index,
first feature, lowest threshold).

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import logging
import math
from typing import Sequence, Union

import numpy as np

from edp.errors import ConfigError, TraceFormatError
from edp.features import Dataset, FeatureSchema

logger = logging.getLogger(__name__)

MODEL_FORMAT = "edgeplanner-model"
MODEL_VERSION = 1

ALGORITHMS = ("ZeroR", "NaiveBayes", "KNN", "DecisionTree")
ALIASES = {"zeror": "ZeroR", "nb": "NaiveBayes", "knn": "KNN", "tree": "DecisionTree"}
DEFAULT_HYPERPARAMS = {
    "ZeroR": {},
    "NaiveBayes": {"alpha": 1.0, "var_floor": 1e-9},
    "KNN": {"k": 1},
    "DecisionTree": {"max_depth": 25, "min_leaf": 2},
}
# Rows of the query batch scored at once by KNN.
KNN_CHUNK = 256
MIN_GAIN = 1e-12


def resolve_algorithm(tag: str) -> str:
    """Map a CLI alias or algorithm name onto its canonical name."""
    if tag in ALGORITHMS:
        return tag
    if tag.lower() in ALIASES:
        return ALIASES[tag.lower()]
    raise ConfigError(
        "algorithm",
        f"unsupported algorithm `{tag}`; valid: {', '.join(ALIASES)}",
    )


class Model:
    """Trained classifier.

    Attributes
    ----------
    algorithm : str
    schema : FeatureSchema
        Fitted schema used to normalize and encode queries.
    classes : tuple[str]
        Labels the model can predict, canonical order.
    hyperparams : dict
    """

    algorithm = None

    def __init__(self, schema: FeatureSchema, classes, hyperparams: dict):
        self.schema = schema
        self.classes = tuple(classes)
        self.hyperparams = dict(hyperparams)

    def predict_matrix(
        self, numeric: np.ndarray, codes: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Predicted class indices and distributions for normalized rows."""
        raise NotImplementedError

    def predict_dataset(self, dataset: Dataset) -> tuple[list[str], np.ndarray]:
        """Labels and distributions for every row of `dataset`."""
        numeric, codes = dataset.matrices(self.schema)
        indices, distributions = self.predict_matrix(numeric, codes)
        return [self.classes[i] for i in indices], distributions

    def predict_features(self, features: Sequence) -> tuple[str, dict[str, float]]:
        numeric, categorical = self.schema.split_raw([features])
        indices, distributions = self.predict_matrix(
            self.schema.normalize(numeric), self.schema.codes(categorical)
        )
        distribution = {
            label: float(p) for label, p in zip(self.classes, distributions[0])
        }
        return self.classes[int(indices[0])], distribution

    def size(self) -> int:
        """Model size proxy: stored instances, parameters or nodes."""
        raise NotImplementedError

    def state(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "algorithm": self.algorithm,
            "hyperparams": self.hyperparams,
            "classes": list(self.classes),
            "schema": self.schema.to_dict(),
            "state": self.state(),
        }


class ZeroRModel(Model):
    """Always predicts the majority class of the training data."""

    algorithm = "ZeroR"

    def __init__(self, schema, classes, hyperparams, frequencies):
        super().__init__(schema, classes, hyperparams)
        self.frequencies = np.asarray(frequencies, dtype=float)
        self.majority = int(np.argmax(self.frequencies))

    def predict_matrix(self, numeric, codes):
        rows = len(numeric) if len(numeric) else len(codes)
        indices = np.full(rows, self.majority, dtype=np.int64)
        return indices, np.tile(self.frequencies, (rows, 1))

    def size(self):
        return 1

    def state(self):
        return {"frequencies": self.frequencies.tolist()}


class NaiveBayesModel(Model):
    """Gaussian likelihoods on numerics, Laplace tables on categoricals."""

    algorithm = "NaiveBayes"

    def __init__(self, schema, classes, hyperparams, log_priors, means, variances, tables):
        super().__init__(schema, classes, hyperparams)
        self.log_priors = np.asarray(log_priors, dtype=float)
        # (classes, numeric features)
        self.means = np.asarray(means, dtype=float).reshape(len(self.classes), -1)
        self.variances = np.asarray(variances, dtype=float).reshape(len(self.classes), -1)
        # One (classes, vocabulary + 1) table of log-probabilities per
        # categorical feature; the last column holds unseen values.
        self.tables = [np.asarray(table, dtype=float) for table in tables]

    def log_posteriors(self, numeric, codes) -> np.ndarray:
        rows = numeric.shape[0]
        scores = np.tile(self.log_priors, (rows, 1))
        for f in range(self.means.shape[1]):
            x = numeric[:, f][:, None]
            var = self.variances[:, f][None, :]
            scores += -0.5 * np.log(2 * math.pi * var) - (x - self.means[:, f][None, :]) ** 2 / (2 * var)
        for f, table in enumerate(self.tables):
            column = np.where(codes[:, f] >= 0, codes[:, f], table.shape[1] - 1)
            scores += table[:, column].T
        return scores

    def predict_matrix(self, numeric, codes):
        scores = self.log_posteriors(numeric, codes)
        indices = np.argmax(scores, axis=1)
        shifted = scores - scores.max(axis=1, keepdims=True)
        weights = np.exp(shifted)
        return indices, weights / weights.sum(axis=1, keepdims=True)

    def size(self):
        return int(
            self.log_priors.size + self.means.size + self.variances.size
            + sum(table.size for table in self.tables)
        )

    def state(self):
        return {
            "log_priors": self.log_priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "tables": [table.tolist() for table in self.tables],
        }


class KnnModel(Model):
    """k nearest neighbours under a mixed distance.

    Squared distance = sum of squared differences of normalized numerics +
    number of mismatching categorical features.
    """

    algorithm = "KNN"

    def __init__(self, schema, classes, hyperparams, numeric, codes, y):
        super().__init__(schema, classes, hyperparams)
        self.k = int(hyperparams["k"])
        self.numeric = np.asarray(numeric, dtype=float).reshape(len(y), -1)
        self.codes = np.asarray(codes, dtype=np.int64).reshape(len(y), -1)
        self.y = np.asarray(y, dtype=np.int64)

    def squared_distances(self, numeric, codes) -> np.ndarray:
        d2 = np.zeros((numeric.shape[0], self.y.size))
        for f in range(self.numeric.shape[1]):
            d2 += (numeric[:, f][:, None] - self.numeric[:, f][None, :]) ** 2
        for f in range(self.codes.shape[1]):
            d2 += codes[:, f][:, None] != self.codes[:, f][None, :]
        return d2

    def predict_matrix(self, numeric, codes):
        k = min(self.k, self.y.size)
        rows = max(numeric.shape[0], codes.shape[0])
        indices = np.empty(rows, dtype=np.int64)
        distributions = np.empty((rows, len(self.classes)))
        for start in range(0, rows, KNN_CHUNK):
            stop = min(start + KNN_CHUNK, rows)
            d2 = self.squared_distances(numeric[start:stop], codes[start:stop])
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1 : k]
            for row, within in enumerate(d2 <= kth):
                # Ties at the k-th distance go to the lowest training index.
                candidates = np.flatnonzero(within)
                order = np.argsort(d2[row, candidates], kind="stable")[:k]
                neighbours = candidates[order]
                votes = np.bincount(self.y[neighbours], minlength=len(self.classes))
                indices[start + row] = int(np.argmax(votes))
                distributions[start + row] = votes / k
        return indices, distributions

    def size(self):
        return int(self.y.size)

    def state(self):
        return {
            "k": self.k,
            "numeric": self.numeric.tolist(),
            "codes": self.codes.tolist(),
            "y": self.y.tolist(),
        }


class TreeNode:
    """Decision tree node.

    A leaf has `feature` None. Numeric splits send `x <= threshold` to
    `children[0]` and the rest to `children[1]`; categorical splits map a
    category code to its child.
    """

    def __init__(self, counts, feature=None, threshold=None, children=None):
        self.counts = np.asarray(counts, dtype=float)
        self.feature = feature
        self.threshold = threshold
        self.children = children or {}

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def node_count(self) -> int:
        return 1 + sum(child.node_count() for child in self.children.values())

    def to_dict(self) -> dict:
        data = {"counts": self.counts.tolist()}
        if not self.is_leaf:
            data["feature"] = self.feature
            data["threshold"] = self.threshold
            data["children"] = [
                [key, child.to_dict()] for key, child in self.children.items()
            ]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TreeNode":
        children = {
            key: cls.from_dict(child) for key, child in data.get("children", [])
        }
        return cls(
            data["counts"], data.get("feature"), data.get("threshold"), children
        )


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Entropy in bits of each row of class counts."""
    counts = np.atleast_2d(counts)
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), 0.0)
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1)), 0.0)
    return terms.sum(axis=1)


class DecisionTreeModel(Model):
    """Information-gain tree with binary numeric and multiway categorical
    splits."""

    algorithm = "DecisionTree"

    def __init__(self, schema, classes, hyperparams, root: TreeNode):
        super().__init__(schema, classes, hyperparams)
        self.root = root
        self.num_numeric = len(schema.numeric_indices)

    def _leaf_counts(self, numeric_row, codes_row) -> np.ndarray:
        node = self.root
        while not node.is_leaf:
            if node.feature < self.num_numeric:
                branch = 0 if numeric_row[node.feature] <= node.threshold else 1
            else:
                branch = int(codes_row[node.feature - self.num_numeric])
            child = node.children.get(branch)
            if child is None:
                break
            node = child
        return node.counts

    def predict_matrix(self, numeric, codes):
        rows = max(numeric.shape[0], codes.shape[0])
        indices = np.empty(rows, dtype=np.int64)
        distributions = np.empty((rows, len(self.classes)))
        for r in range(rows):
            counts = self._leaf_counts(numeric[r], codes[r])
            indices[r] = int(np.argmax(counts))
            distributions[r] = counts / counts.sum()
        return indices, distributions

    def size(self):
        return self.root.node_count()

    def depth(self) -> int:
        def walk(node):
            return 0 if node.is_leaf else 1 + max(walk(c) for c in node.children.values())
        return walk(self.root)

    def state(self):
        return {"root": self.root.to_dict()}


class _TreeGrower:
    """Greedy top-down growth of a DecisionTreeModel.

    Features are addressed in one index space: numerics first (schema
    numeric order), then categoricals.
    """

    def __init__(self, numeric, codes, y, num_classes, max_depth, min_leaf):
        self.numeric = numeric
        self.codes = codes
        self.y = y
        self.num_classes = num_classes
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.onehot = np.eye(num_classes)[y]

    def grow(self, rows: np.ndarray, depth: int = 0) -> TreeNode:
        counts = self.onehot[rows].sum(axis=0)
        node = TreeNode(counts)
        if (
            np.count_nonzero(counts) <= 1
            or depth >= self.max_depth
            or rows.size < 2 * self.min_leaf
        ):
            return node
        split = self.best_split(rows, counts)
        if split is None:
            return node
        feature, threshold, partitions = split
        node.feature = feature
        node.threshold = threshold
        node.children = {
            key: self.grow(part, depth + 1) for key, part in partitions
        }
        return node

    def best_split(self, rows, counts):
        parent_entropy = float(_entropy(counts)[0])
        n = rows.size
        best_gain = MIN_GAIN
        best = None
        for f in range(self.numeric.shape[1]):
            values = self.numeric[rows, f]
            order = np.argsort(values, kind="stable")
            sorted_values = values[order]
            left = np.cumsum(self.onehot[rows[order]], axis=0)[:-1]
            sizes = np.arange(1, n)
            valid = (
                (sorted_values[:-1] < sorted_values[1:])
                & (sizes >= self.min_leaf)
                & (n - sizes >= self.min_leaf)
            )
            if not valid.any():
                continue
            right = counts[None, :] - left
            weighted = (sizes * _entropy(left) + (n - sizes) * _entropy(right)) / n
            gains = np.where(valid, parent_entropy - weighted, -np.inf)
            position = int(np.argmax(gains))
            if gains[position] > best_gain:
                best_gain = float(gains[position])
                low = float(sorted_values[position])
                high = float(sorted_values[position + 1])
                threshold = low + (high - low) / 2
                if threshold >= high:
                    threshold = low
                best = (f, threshold)
        for c in range(self.codes.shape[1]):
            column = self.codes[rows, c]
            categories = np.unique(column)
            if categories.size < 2:
                continue
            table = np.stack(
                [self.onehot[rows[column == v]].sum(axis=0) for v in categories]
            )
            sizes = table.sum(axis=1)
            if np.count_nonzero(sizes >= self.min_leaf) < 2:
                continue
            weighted = float((sizes * _entropy(table)).sum() / n)
            gain = parent_entropy - weighted
            if gain > best_gain:
                best_gain = gain
                best = (self.numeric.shape[1] + c, None)
        if best is None:
            return None
        feature, threshold = best
        if threshold is not None:
            mask = self.numeric[rows, feature] <= threshold
            partitions = [(0, rows[mask]), (1, rows[~mask])]
        else:
            column = self.codes[rows, feature - self.numeric.shape[1]]
            partitions = [(int(v), rows[column == v]) for v in np.unique(column)]
        return feature, threshold, partitions


def train(
    alg: str,
    dataset: Dataset,
    hyperparams: Union[dict, None] = None,
    rng=None,
) -> Model:
    """Train a classifier on `dataset`.

    Parameters
    ----------
    alg : str
        Algorithm name or alias (`zeror`, `nb`, `knn`, `tree`).
    dataset : Dataset
        Training data; its fitted schema becomes the model's schema.
    hyperparams : dict or None
        Overrides of DEFAULT_HYPERPARAMS for the algorithm.
    rng : numpy Generator or None
        Unused by the four deterministic learners.
    """
    alg = resolve_algorithm(alg)
    if len(dataset) == 0:
        raise ConfigError("dataset", "cannot train on an empty dataset")
    params = {**DEFAULT_HYPERPARAMS[alg], **(hyperparams or {})}
    unknown = set(params) - set(DEFAULT_HYPERPARAMS[alg])
    if unknown:
        raise ConfigError(
            f"hyperparams.{sorted(unknown)[0]}", f"not a {alg} hyperparameter"
        )
    present = np.flatnonzero(dataset.class_counts())
    classes = [dataset.classes[i] for i in present]
    remap = np.full(len(dataset.classes), -1, dtype=np.int64)
    remap[present] = np.arange(present.size)
    y = remap[dataset.y]
    numeric, codes = dataset.matrices()
    schema = dataset.schema
    if alg == "ZeroR":
        counts = np.bincount(y, minlength=len(classes))
        return ZeroRModel(schema, classes, params, counts / counts.sum())
    if alg == "KNN":
        if int(params["k"]) < 1:
            raise ConfigError("hyperparams.k", "must be >= 1")
        return KnnModel(schema, classes, params, numeric, codes, y)
    if alg == "NaiveBayes":
        return _train_naive_bayes(schema, classes, params, numeric, codes, y)
    grower = _TreeGrower(
        numeric, codes, y, len(classes),
        int(params["max_depth"]), int(params["min_leaf"]),
    )
    root = grower.grow(np.arange(len(y)))
    model = DecisionTreeModel(schema, classes, params, root)
    logger.debug("tree: %d nodes, depth %d", model.size(), model.depth())
    return model


def _train_naive_bayes(schema, classes, params, numeric, codes, y) -> NaiveBayesModel:
    alpha = float(params["alpha"])
    var_floor = float(params["var_floor"])
    num_classes = len(classes)
    counts = np.bincount(y, minlength=num_classes).astype(float)
    log_priors = np.log(counts / counts.sum())
    means = np.zeros((num_classes, numeric.shape[1]))
    variances = np.zeros((num_classes, numeric.shape[1]))
    for c in range(num_classes):
        rows = numeric[y == c]
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), var_floor)
    tables = []
    for f, size in enumerate(schema.vocabulary_sizes()):
        table = np.zeros((num_classes, size + 1))
        for c in range(num_classes):
            observed = np.bincount(codes[y == c, f], minlength=size)[:size]
            denominator = counts[c] + alpha * size
            table[c, :size] = np.log((observed + alpha) / denominator)
            table[c, size] = math.log(alpha / denominator)
        tables.append(table)
    return NaiveBayesModel(schema, classes, params, log_priors, means, variances, tables)


def predict(model: Model, instance) -> tuple[str, dict[str, float]]:
    """Label and class distribution of one instance.

    `instance` is a LabeledInstance (its label is ignored) or a raw feature
    sequence in schema order.
    """
    features = getattr(instance, "features", instance)
    return model.predict_features(features)


def model_from_dict(data: dict) -> Model:
    """Rebuild a model from its JSON document."""
    if data.get("format") != MODEL_FORMAT:
        raise TraceFormatError("<model>", 0, "not an edgeplanner model document")
    schema = FeatureSchema.from_dict(data["schema"])
    classes = data["classes"]
    params = data["hyperparams"]
    state = data["state"]
    algorithm = data["algorithm"]
    if algorithm == "ZeroR":
        return ZeroRModel(schema, classes, params, state["frequencies"])
    if algorithm == "NaiveBayes":
        return NaiveBayesModel(
            schema, classes, params, state["log_priors"], state["means"],
            state["variances"], state["tables"],
        )
    if algorithm == "KNN":
        return KnnModel(
            schema, classes, params, state["numeric"], state["codes"], state["y"]
        )
    if algorithm == "DecisionTree":
        return DecisionTreeModel(
            schema, classes, params, TreeNode.from_dict(state["root"])
        )
    raise TraceFormatError("<model>", 0, f"unknown algorithm `{algorithm}`")
