import math

import numpy as np
import pytest

from edp.geo import (
    EARTH_RADIUS_KM, GpsPoint, LocalFrame, haversine_km, haversine_km_array,
    round_point,
)


def test_identical_points_are_zero_apart():
    assert haversine_km(GpsPoint(0.0, 0.0), GpsPoint(0.0, 0.0)) == 0.0
    p = GpsPoint(60.17, 24.94)
    assert haversine_km(p, p) == 0.0


def test_quarter_great_circle():
    d = haversine_km(GpsPoint(0.0, 0.0), GpsPoint(90.0, 0.0))
    assert d == pytest.approx(math.pi * EARTH_RADIUS_KM / 2)
    assert d == pytest.approx(10007.543, abs=1e-3)


def test_antipodal_points_are_half_the_circumference():
    assert haversine_km(GpsPoint(0.0, 0.0), GpsPoint(0.0, 180.0)) == math.pi * EARTH_RADIUS_KM
    assert haversine_km(GpsPoint(90.0, 0.0), GpsPoint(-90.0, 0.0)) == math.pi * EARTH_RADIUS_KM


def test_one_hundredth_of_a_degree_of_latitude():
    d = haversine_km(GpsPoint(60.17, 24.94), GpsPoint(60.18, 24.94))
    assert d == pytest.approx(1.11195, abs=1e-5)


def test_metric_properties_on_random_triples():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b, c = (
            GpsPoint(float(rng.uniform(-90, 90)), float(rng.uniform(-180, 180)))
            for _ in range(3)
        )
        ab = haversine_km(a, b)
        assert ab == pytest.approx(haversine_km(b, a), rel=1e-12)
        assert 0.0 <= ab <= math.pi * EARTH_RADIUS_KM
        assert ab <= haversine_km(a, c) + haversine_km(c, b) + 1e-9


def test_vectorized_form_matches_scalar():
    rng = np.random.default_rng(11)
    lats = rng.uniform(-90, 90, size=50)
    lons = rng.uniform(-180, 180, size=50)
    distances = haversine_km_array(lats[0], lons[0], lats, lons)
    for i in range(50):
        expected = haversine_km(
            GpsPoint(float(lats[0]), float(lons[0])),
            GpsPoint(float(lats[i]), float(lons[i])),
        )
        assert distances[i] == pytest.approx(expected, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("lat, lon", [(91.0, 0.0), (-90.5, 0.0), (0.0, 180.1)])
def test_gps_point_rejects_out_of_range(lat, lon):
    with pytest.raises(ValueError):
        GpsPoint(lat, lon)


def test_local_frame_round_trip():
    frame = LocalFrame(GpsPoint(60.17, 24.94))
    point = frame.to_gps(1234.5, -987.0)
    x, y = frame.to_meters(point)
    assert x == pytest.approx(1234.5, abs=1e-6)
    assert y == pytest.approx(-987.0, abs=1e-6)


def test_local_frame_meters_agree_with_haversine_at_city_scale():
    origin = GpsPoint(60.17, 24.94)
    frame = LocalFrame(origin)
    assert haversine_km(origin, frame.to_gps(0.0, 1000.0)) == pytest.approx(1.0, rel=1e-9)
    assert haversine_km(origin, frame.to_gps(1000.0, 0.0)) == pytest.approx(1.0, rel=1e-3)


def test_round_point_keeps_six_places():
    assert round_point(GpsPoint(60.1234567, 24.9876543)) == GpsPoint(60.123457, 24.987654)
