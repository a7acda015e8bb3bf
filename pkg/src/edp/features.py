"""Encode labeled trace records into classifier datasets.

Feature order of trace datasets (fixed):

    time_of_day_s, lat, lon, enodeb_id, uplink_kbps, downlink_kbps, zone

optionally followed by `ue_id`. `enodeb_id`, `zone` and `ue_id` are
categorical; the rest are numeric and min-max normalized with the statistics
of the training data. The class is the service name.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from edp.config import ServiceKind
from edp.errors import EmptyDatasetError, TraceFormatError
from edp.tracegen import NO_SERVICE, TraceRecord

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
SECONDS_PER_DAY = 86400

TRACE_FEATURES = (
    ("time_of_day_s", NUMERIC),
    ("lat", NUMERIC),
    ("lon", NUMERIC),
    ("enodeb_id", CATEGORICAL),
    ("uplink_kbps", NUMERIC),
    ("downlink_kbps", NUMERIC),
    ("zone", CATEGORICAL),
)
UE_ID_FEATURE = ("ue_id", CATEGORICAL)

_SERVICE_ORDER = {kind.value: index for index, kind in enumerate(ServiceKind)}


def label_sort_key(label: str) -> tuple[int, str]:
    """Canonical service order first, any other label after it."""
    return (_SERVICE_ORDER.get(label, len(_SERVICE_ORDER)), label)


@dataclass(frozen=True)
class LabeledInstance:
    """Raw feature vector (schema order) and its class label."""

    features: tuple
    label: str


class FeatureSchema:
    """Feature names and kinds, plus statistics fitted on training data.

    Attributes
    ----------
    names : tuple[str]
    kinds : tuple[str]
        `numeric` or `categorical` for each feature.
    minimums, maximums : tuple[float] or None
        Min-max statistics of the numeric features, in numeric order.
    vocabularies : tuple[tuple[str]] or None
        Sorted observed values of the categorical features.
    """

    def __init__(self, features, minimums=None, maximums=None, vocabularies=None):
        self.names = tuple(name for name, _ in features)
        self.kinds = tuple(kind for _, kind in features)
        for kind in self.kinds:
            if kind not in (NUMERIC, CATEGORICAL):
                raise ValueError(f"unknown feature kind `{kind}`")
        self.numeric_indices = [i for i, k in enumerate(self.kinds) if k == NUMERIC]
        self.categorical_indices = [
            i for i, k in enumerate(self.kinds) if k == CATEGORICAL
        ]
        self.minimums = None if minimums is None else tuple(minimums)
        self.maximums = None if maximums is None else tuple(maximums)
        self.vocabularies = (
            None if vocabularies is None else tuple(tuple(v) for v in vocabularies)
        )
        self._codes = (
            None
            if vocabularies is None
            else [{value: code for code, value in enumerate(v)} for v in self.vocabularies]
        )

    @property
    def features(self) -> tuple[tuple[str, str], ...]:
        return tuple(zip(self.names, self.kinds))

    @property
    def fitted(self) -> bool:
        return self.minimums is not None

    def fit(self, numeric: np.ndarray, categorical: np.ndarray) -> "FeatureSchema":
        """New schema with statistics of the given raw matrices."""
        if len(numeric):
            minimums = numeric.min(axis=0).tolist()
            maximums = numeric.max(axis=0).tolist()
        else:
            minimums = [0.0] * len(self.numeric_indices)
            maximums = [0.0] * len(self.numeric_indices)
        vocabularies = [
            sorted(set(categorical[:, j].tolist()))
            for j in range(len(self.categorical_indices))
        ]
        return FeatureSchema(self.features, minimums, maximums, vocabularies)

    def normalize(self, numeric: np.ndarray) -> np.ndarray:
        """Min-max scaling; a zero-range feature maps to 0."""
        minimums = np.asarray(self.minimums, dtype=float)
        spans = np.asarray(self.maximums, dtype=float) - minimums
        safe = np.where(spans > 0, spans, 1.0)
        scaled = (numeric - minimums) / safe
        return np.where(spans > 0, scaled, 0.0)

    def codes(self, categorical: np.ndarray) -> np.ndarray:
        """Integer codes of categorical values; -1 for unseen values."""
        out = np.full(categorical.shape, -1, dtype=np.int64)
        for j, mapping in enumerate(self._codes):
            out[:, j] = [mapping.get(value, -1) for value in categorical[:, j]]
        return out

    def vocabulary_sizes(self) -> list[int]:
        return [len(v) for v in self.vocabularies]

    def split_raw(self, rows: Sequence[Sequence]) -> tuple[np.ndarray, np.ndarray]:
        """Split raw feature rows into numeric and categorical matrices."""
        numeric = np.array(
            [[float(row[i]) for i in self.numeric_indices] for row in rows],
            dtype=float,
        ).reshape(len(rows), len(self.numeric_indices))
        categorical = np.array(
            [[str(row[i]) for i in self.categorical_indices] for row in rows],
            dtype=object,
        ).reshape(len(rows), len(self.categorical_indices))
        return numeric, categorical

    def to_dict(self) -> dict:
        return {
            "features": [[name, kind] for name, kind in self.features],
            "minimums": None if self.minimums is None else list(self.minimums),
            "maximums": None if self.maximums is None else list(self.maximums),
            "vocabularies": (
                None if self.vocabularies is None else [list(v) for v in self.vocabularies]
            ),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSchema":
        return cls(
            [tuple(feature) for feature in data["features"]],
            data.get("minimums"),
            data.get("maximums"),
            data.get("vocabularies"),
        )


def trace_schema(include_ue_id: bool = False) -> FeatureSchema:
    features = TRACE_FEATURES + ((UE_ID_FEATURE,) if include_ue_id else ())
    return FeatureSchema(features)


class Dataset:
    """Raw feature matrices, labels and the schema fitted on them.

    Attributes
    ----------
    schema : FeatureSchema
        Fitted on this dataset unless a fitted schema was supplied.
    numeric : np.ndarray
        Raw numeric features, shape (n, numeric features).
    categorical : np.ndarray
        Raw categorical values as strings, shape (n, categorical features).
    labels : list[str]
    classes : tuple[str]
        Distinct labels in canonical order.
    y : np.ndarray
        Index of every label in `classes`.
    """

    def __init__(self, schema, numeric, categorical, labels, classes=None):
        self.numeric = numeric
        self.categorical = categorical
        self.labels = list(labels)
        if classes is None:
            classes = sorted(set(self.labels), key=label_sort_key)
        self.classes = tuple(classes)
        index = {label: i for i, label in enumerate(self.classes)}
        self.y = np.array([index[label] for label in self.labels], dtype=np.int64)
        self.schema = schema if schema.fitted else schema.fit(numeric, categorical)

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_instances(
        cls, instances: Sequence[LabeledInstance], schema: FeatureSchema
    ) -> "Dataset":
        numeric, categorical = schema.split_raw([inst.features for inst in instances])
        return cls(schema, numeric, categorical, [inst.label for inst in instances])

    @property
    def instances(self) -> list[LabeledInstance]:
        rows = []
        for r in range(len(self)):
            features = [None] * len(self.schema.names)
            for j, i in enumerate(self.schema.numeric_indices):
                features[i] = float(self.numeric[r, j])
            for j, i in enumerate(self.schema.categorical_indices):
                features[i] = self.categorical[r, j]
            rows.append(LabeledInstance(tuple(features), self.labels[r]))
        return rows

    def matrices(
        self, schema: Union[FeatureSchema, None] = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Normalized numerics and categorical codes under `schema`."""
        schema = schema or self.schema
        return schema.normalize(self.numeric), schema.codes(self.categorical)

    def subset(self, indices, refit: bool = True) -> "Dataset":
        """Rows at `indices`; statistics refitted on them when `refit`."""
        indices = np.asarray(indices, dtype=np.int64)
        schema = FeatureSchema(self.schema.features) if refit else self.schema
        return Dataset(
            schema,
            self.numeric[indices],
            self.categorical[indices],
            [self.labels[i] for i in indices],
            classes=self.classes,
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=len(self.classes))


def record_features(record: TraceRecord, schema: FeatureSchema) -> tuple:
    """Raw feature tuple of one trace record in `schema` order."""
    values = {
        "time_of_day_s": float(record.time_s % SECONDS_PER_DAY),
        "lat": record.lat,
        "lon": record.lon,
        "enodeb_id": str(record.enodeb_id),
        "uplink_kbps": float(record.datarate_uplink_kbps),
        "downlink_kbps": float(record.datarate_downlink_kbps),
        "zone": record.zone or "NOISE",
        "ue_id": str(record.ue_id),
    }
    try:
        return tuple(values[name] for name in schema.names)
    except KeyError as error:
        raise TraceFormatError("<schema>", 0, f"unknown trace feature {error}") from None


def encode(
    records: Sequence[TraceRecord],
    schema: Union[FeatureSchema, None] = None,
    include_ue_id: bool = False,
) -> Dataset:
    """Build a dataset from the labeled (non-idle) rows of a trace.

    Parameters
    ----------
    records : sequence of TraceRecord
        Rows with service `NONE` are dropped. An empty zone column counts as
        `NOISE`.
    schema : FeatureSchema or None
        Fitted schema to reuse (e.g. a model's); None builds the trace schema
        and fits it on these rows.
    include_ue_id : bool
        Append `ue_id` as a categorical feature when building the schema.
    """
    labeled = [record for record in records if record.service_name != NO_SERVICE]
    if not labeled:
        raise EmptyDatasetError("the trace has no labeled (non-idle) records")
    if schema is None:
        schema = trace_schema(include_ue_id)
    rows = [record_features(record, schema) for record in labeled]
    numeric, categorical = schema.split_raw(rows)
    dataset = Dataset(
        schema, numeric, categorical, [record.service_name for record in labeled]
    )
    logger.info(
        "encoded %d labeled instances (%d idle rows dropped), %d classes",
        len(dataset), len(records) - len(labeled), len(dataset.classes),
    )
    return dataset
