import io
import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shipcrbm.errors import ValidationError
from shipcrbm.ingest import AisRecord, RawTrace
from shipcrbm.regularize import (
    BathyGrid,
    BathyZone,
    ShipTrace,
    bathy_zone,
    bearing,
    derive_features,
    interpolate_trace,
    make_timegrid,
    read_trace_csv,
    relative_rotation,
    write_trace_csv,
)

T0 = datetime(2014, 4, 13, tzinfo=timezone.utc)
DEEP = BathyGrid(np.full((10, 10), 2000.0), 0.0, 40.0, 0.5)


def raw(points, sid=1, type_code=70):
    """points: (seconds after T0, lat, lon, sog[, navstatus])"""
    recs = []
    for p in points:
        nav = p[4] if len(p) > 4 else 0
        recs.append(AisRecord(mmsi=sid, imo=None, timestamp=T0 + timedelta(seconds=p[0]), lat=p[1],
                              lon=p[2], sog=p[3], navstatus=nav, typeofshipandcargo=type_code))
    return RawTrace(sid, tuple(recs))


def at(seconds):
    return T0 + timedelta(seconds=seconds)


class TestTimeGrid:
    def test_five_second_grid(self):
        assert make_timegrid(at(0), at(20), 5) == [at(s) for s in (0, 5, 10, 15, 20)]

    def test_single_aligned_instant(self):
        assert make_timegrid(at(5), at(5), 5) == [at(5)]

    def test_no_aligned_point(self):
        assert make_timegrid(at(1), at(4), 5) == []

    def test_reversed_range_is_empty(self):
        assert make_timegrid(at(10), at(0), 5) == []

    def test_start_rounded_up_to_epoch_multiple(self):
        assert make_timegrid(at(3), at(12), 5)[0] == at(5)


class TestInterpolation:
    def test_midpoint(self):
        tr = interpolate_trace(raw([(0, 40.0, 2.0, 0.0), (10, 41.0, 2.0, 0.0)]), step=5)
        assert tr.lat[1] == pytest.approx(40.5, rel=1e-12)
        assert list(tr.sog) == [0.0, 0.0, 0.0]

    def test_gap_over_72h_splits_segments(self):
        gap = 73 * 3600
        tr = interpolate_trace(raw([(0, 40, 2, 1), (60, 40, 2, 1), (60 + gap, 41, 2, 1),
                                    (120 + gap, 41, 2, 1)]), step=60)
        assert len(tr.segment_starts) == 2
        assert len(tr) == 4
        assert np.diff(tr.t).max() >= gap

    def test_gap_just_under_72h_is_bridged(self):
        gap = 72 * 3600 - 60
        tr = interpolate_trace(raw([(0, 40, 2, 1), (gap, 41, 2, 1)]), step=3600)
        assert tr.segment_starts == (0,)
        assert len(tr) == 72

    def test_categorical_codes_carried_forward(self):
        tr = interpolate_trace(raw([(0, 40, 2, 1, 5), (10, 40, 2, 1, 0), (20, 40, 2, 1, 7)]), step=5)
        assert list(tr.navstatus) == [5, 5, 0, 0, 7]
        assert set(tr.ship_type) == {7}

    def test_isolated_record_between_long_gaps_dropped(self):
        day = 24 * 3600
        tr = interpolate_trace(raw([(0, 40, 2, 1), (60, 40, 2, 1), (60 + 4 * day, 41, 2, 1)]), step=60)
        assert tr.t.tolist() == [int(T0.timestamp()), int(T0.timestamp()) + 60]
        assert tr.segment_starts == (0,)

    def test_too_few_records(self):
        tr = interpolate_trace(raw([(0, 40, 2, 1)]), step=5)
        assert len(tr) == 0


def _oracle_value(times, values, t):
    for (t1, v1), (t2, v2) in zip(zip(times, values), zip(times[1:], values[1:])):
        if t1 <= t <= t2:
            return v1 + (v2 - v1) * (t - t1) / (t2 - t1)
    raise AssertionError("grid point outside raw support")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3000), st.floats(-80, 80), st.floats(0, 30)),
                min_size=2, max_size=12))
def test_interpolation_matches_pairwise_formula(rows):
    t = np.cumsum([r[0] for r in rows])
    tr = interpolate_trace(raw([(int(ti), r[1], 2.0, r[2]) for ti, r in zip(t, rows)]), step=7)
    base = int(T0.timestamp())
    for i in range(len(tr)):
        s = int(tr.t[i]) - base
        exp = _oracle_value(list(t), [r[1] for r in rows], s)
        assert math.isclose(tr.lat[i], exp, rel_tol=1e-9, abs_tol=1e-12)
        assert tr.t[i] % 7 == 0


class TestBearing:
    @pytest.mark.parametrize("p2, expected", [((1, 0), 0.0), ((0, 1), 90.0), ((-1, 0), 180.0),
                                              ((0, -1), 270.0)])
    def test_cardinal_directions(self, p2, expected):
        assert bearing((0, 0), p2) == pytest.approx(expected, abs=1e-9)

    def test_degenerate_pair(self):
        with pytest.raises(ValidationError, match="degenerate"):
            bearing((1, 1), (1, 1))


class TestRelativeRotation:
    @pytest.mark.parametrize("prev, cur, expected", [(350, 10, 20), (90, 90, 0), (10, 350, -20),
                                                     (0, 180, 180), (180, 0, 180)])
    def test_examples(self, prev, cur, expected):
        assert relative_rotation(prev, cur) == pytest.approx(expected)

    @given(st.floats(0, 359.999), st.floats(0, 359.999))
    def test_antisymmetric_and_bounded(self, a, b):
        r = relative_rotation(a, b)
        assert -180 < r <= 180
        if abs(abs(r) - 180) > 1e-9:
            assert relative_rotation(b, a) == pytest.approx(-r, abs=1e-9)


class TestBathyZone:
    @pytest.mark.parametrize("depth, zone", [(30, BathyZone.COAST), (500, BathyZone.FISHING),
                                             (50, BathyZone.FISHING), (1000, BathyZone.FISHING),
                                             (1000.1, BathyZone.HIGH_SEA), (-5, BathyZone.COAST)])
    def test_thresholds(self, depth, zone):
        assert bathy_zone(depth) is zone

    @given(st.floats(0, 5000), st.floats(0, 5000))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert bathy_zone(lo) <= bathy_zone(hi)


class TestBathyGrid:
    TEXT = ("ncols 3\nnrows 2\nxllcorner 2.0\nyllcorner 40.0\ncellsize 0.5\nNODATA_value -9999\n"
            "10 20 30\n40 -9999 60\n")

    def test_parse_and_nearest_cell(self):
        g = BathyGrid.parse(io.StringIO(self.TEXT))
        assert g.bbox == (2.0, 40.0, 3.5, 41.0)
        # row 0 is the northern row
        assert g.lookup(40.75, 2.1)[0] == 10
        assert g.lookup(40.25, 3.4)[0] == 60
        assert g.lookup(40.25, 2.6)[0] == -1.0  # no sounding -> land
        assert math.isnan(g.lookup(39.0, 2.1)[0])

    def test_upper_edge_inside(self):
        g = BathyGrid.parse(io.StringIO(self.TEXT))
        assert g.lookup(41.0, 3.5)[0] == 30

    def test_roundtrip(self):
        g = BathyGrid.parse(io.StringIO(self.TEXT))
        buf = io.StringIO()
        g.write(buf)
        g2 = BathyGrid.parse(io.StringIO(buf.getvalue()))
        np.testing.assert_array_equal(g.depths, g2.depths)


def _regular(lat, lon, step=60):
    n = len(lat)
    return ShipTrace(1, step, np.arange(n, dtype=np.int64) * step, np.asarray(lat, float),
                     np.asarray(lon, float), np.full(n, 5.0), np.zeros(n, np.int64),
                     np.full(n, 7, np.int64), (0,))


class TestDeriveFeatures:
    def test_stationary(self):
        tr = derive_features(_regular([41.0] * 6, [2.5] * 6), DEEP)
        assert not tr.dlat.any() and not tr.dlon.any() and not tr.gps_rotation.any()

    def test_straight_line(self):
        tr = derive_features(_regular(np.linspace(41, 41.1, 30), np.linspace(2.5, 2.6, 30)), DEEP)
        assert np.abs(tr.gps_rotation[2:]).max() < 0.01
        assert tr.dlat[0] == 0 and tr.dlat[1] == pytest.approx(0.1 / 29)

    def test_square_loop_has_four_turns(self):
        leg, d = 10, 0.01
        lat, lon = [1.0], [10.0]
        for dy, dx in [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)]:
            for _ in range(leg):
                lat.append(lat[-1] + dy * d)
                lon.append(lon[-1] + dx * d)
        grid = BathyGrid(np.full((4, 4), 2000.0), 9.0, 0.0, 1.0)
        tr = derive_features(_regular(lat, lon), grid)
        spikes = np.flatnonzero(np.abs(tr.gps_rotation) > 45)
        assert len(spikes) == 4

        # oracle: heading of each leg from a local planar approximation
        def leg_heading(dy, dx):
            return math.degrees(math.atan2(dx * math.cos(math.radians(1.0)), dy)) % 360
        legs = [leg_heading(*v) for v in [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)]]
        expected = [(b - a + 180) % 360 - 180 for a, b in zip(legs, legs[1:])]
        np.testing.assert_allclose(tr.gps_rotation[spikes], expected, atol=0.1)

    def test_stop_then_resume_keeps_previous_heading(self):
        lat = [41.0, 41.01, 41.02, 41.02, 41.02, 41.03]
        tr = derive_features(_regular(lat, [2.5] * 6), DEEP)
        assert np.abs(tr.gps_rotation).max() < 1e-6

    def test_zones_and_out_of_grid_flag(self):
        grid = BathyGrid(np.array([[30.0, 500.0, 3000.0]]), 0.0, 0.0, 1.0)
        tr = derive_features(_regular([0.5, 0.5, 0.5, 5.0], [0.5, 1.5, 2.5, 0.5]), grid)
        assert list(tr.bathy_zone) == [0, 1, 2, 2]
        assert tr.flags["outside grid"] == 1

    def test_segments_reset_rotation(self):
        tr = _regular([41.0, 41.01, 41.01, 41.01, 41.02, 41.03], [2.5, 2.5, 2.51, 2.52, 2.52, 2.52])
        tr.segment_starts = (0, 3)
        out = derive_features(tr, DEEP)
        assert out.dlat[3] == 0 and out.gps_rotation[3] == 0 and out.gps_rotation[4] == 0
        assert out.gps_rotation[2] == pytest.approx(90, abs=0.1)


def test_trace_csv_roundtrip():
    tr = interpolate_trace(raw([(0, 41, 2.4, 3), (600, 41.05, 2.45, 4), (600 + 80 * 3600, 41, 2.4, 0),
                                (1200 + 80 * 3600, 41, 2.5, 0)]), step=60)
    tr = derive_features(tr, DEEP)
    buf = io.StringIO()
    write_trace_csv(tr, buf)
    assert buf.getvalue().splitlines()[0] == (
        "ship_id,timestamp,lat,lon,dlat,dlon,sog,gps_rotation,bathy_zone,navstatus,ship_type")
    back = read_trace_csv(io.StringIO(buf.getvalue()), 60)
    assert back.segment_starts == tr.segment_starts
    np.testing.assert_array_equal(back.t, tr.t)
    np.testing.assert_allclose(back.lat, tr.lat, atol=1e-6)
    np.testing.assert_array_equal(back.bathy_zone, tr.bathy_zone)
