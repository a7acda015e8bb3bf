import numpy as np
import pytest

from edp.errors import EmptyDatasetError
from edp.features import (
    TRACE_FEATURES, Dataset, FeatureSchema, LabeledInstance, encode,
    label_sort_key, record_features, trace_schema,
)
from edp.tracegen import TraceRecord


def record(t, ue, service, up=100, down=200, enb=0, zone="", lat=60.17, lon=24.94):
    return TraceRecord(t, ue, service, lat, lon, enb, up, down, zone)


def test_encode_drops_idle_rows():
    records = [
        record(0, 0, "NONE", 0, 0),
        record(5, 0, "MIME", 50, 50),
        record(9, 1, "VideoStreaming", 100, 5000, zone="Z1"),
    ]
    dataset = encode(records)
    assert len(dataset) == 2
    assert dataset.labels == ["MIME", "VideoStreaming"]


def test_encode_without_labeled_rows():
    with pytest.raises(EmptyDatasetError):
        encode([record(0, 0, "NONE", 0, 0)])


def test_feature_order():
    assert trace_schema().names == tuple(name for name, _ in TRACE_FEATURES)
    assert trace_schema(include_ue_id=True).names[-1] == "ue_id"
    assert trace_schema().names == (
        "time_of_day_s", "lat", "lon", "enodeb_id", "uplink_kbps",
        "downlink_kbps", "zone",
    )


def test_record_features():
    features = record_features(
        record(86400 + 3600, 4, "MIME", 50, 60, enb=7, zone=""),
        trace_schema(include_ue_id=True),
    )
    assert features == (3600.0, 60.17, 24.94, "7", 50.0, 60.0, "NOISE", "4")


def test_classes_follow_the_service_order():
    records = [record(1, 0, "SocialNetwork"), record(2, 0, "MIME"), record(3, 0, "IotParking")]
    assert encode(records).classes == ("MIME", "SocialNetwork", "IotParking")
    assert sorted(["zzz", "MIME"], key=label_sort_key) == ["MIME", "zzz"]


def test_normalization_uses_training_statistics():
    records = [record(t, 0, "MIME", up=up) for t, up in ((0, 10), (10, 20), (20, 30))]
    dataset = encode(records)
    numeric, _ = dataset.matrices()
    assert numeric.min() >= 0.0 and numeric.max() <= 1.0
    up_column = dataset.schema.names.index("uplink_kbps")
    column = dataset.schema.numeric_indices.index(up_column)
    assert numeric[:, column].tolist() == [0.0, 0.5, 1.0]
    # Constant features map to 0.
    lat_column = dataset.schema.numeric_indices.index(1)
    assert numeric[:, lat_column].tolist() == [0.0, 0.0, 0.0]


def test_reused_schema_keeps_its_statistics():
    train = encode([record(0, 0, "MIME", up=0), record(1, 0, "MIME", up=100)])
    test = encode([record(2, 0, "MIME", up=200)], schema=train.schema)
    assert test.schema is train.schema
    numeric, _ = test.matrices()
    column = train.schema.numeric_indices.index(train.schema.names.index("uplink_kbps"))
    assert numeric[0, column] == pytest.approx(2.0)


def test_unseen_categories_get_code_minus_one():
    train = encode([record(0, 0, "MIME", enb=1), record(1, 0, "MIME", enb=2)])
    test = encode([record(2, 0, "MIME", enb=9)], schema=train.schema)
    _, codes = test.matrices()
    assert codes[0, 0] == -1


def test_subset_refits_on_its_rows():
    schema = FeatureSchema((("x", "numeric"), ("c", "categorical")))
    instances = [
        LabeledInstance((float(x), "a" if x < 2 else "b"), "A" if x % 2 else "B")
        for x in range(4)
    ]
    dataset = Dataset.from_instances(instances, schema)
    part = dataset.subset([0, 1])
    assert part.schema.minimums == (0.0,) and part.schema.maximums == (1.0,)
    assert part.schema.vocabularies == (("a",),)
    assert part.classes == dataset.classes
    kept = dataset.subset([0, 1], refit=False)
    assert kept.schema is dataset.schema
    assert dataset.class_counts().tolist() == [2, 2]


def test_instances_round_trip_the_raw_rows():
    schema = FeatureSchema((("c", "categorical"), ("x", "numeric")))
    instances = [LabeledInstance(("a", 1.5), "A"), LabeledInstance(("b", -2.0), "B")]
    assert Dataset.from_instances(instances, schema).instances == instances


def test_schema_round_trips_through_dict():
    schema = encode([record(0, 0, "MIME"), record(1, 1, "SocialNetwork", enb=3)]).schema
    restored = FeatureSchema.from_dict(schema.to_dict())
    assert restored.to_dict() == schema.to_dict()
    assert restored.fitted


def test_unknown_kind_is_rejected():
    with pytest.raises(ValueError):
        FeatureSchema((("x", "ordinal"),))


def test_empty_fit_has_zero_ranges():
    schema = FeatureSchema((("x", "numeric"), ("c", "categorical")))
    fitted = schema.fit(np.zeros((0, 1)), np.zeros((0, 1), dtype=object))
    assert fitted.minimums == (0.0,) and fitted.vocabularies == ((),)
