"""Partitioning, row assembly, and recording CSV round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

import varcausal as vc


def _schedule(*spans):
    """spans: (node, t_start, t_end) clamp entries with unit signal."""
    return vc.InterventionSchedule([
        vc.clamp(node, a, np.ones(b - a + 1)) for node, a, b in spans
    ])


@st.composite
def schedules(draw):
    """Random horizon, dim, and a valid schedule of disjoint windows."""
    horizon = draw(st.integers(min_value=5, max_value=80))
    dim = draw(st.integers(min_value=1, max_value=4))
    n_windows = draw(st.integers(min_value=0, max_value=4))
    cuts = draw(st.lists(st.integers(min_value=1, max_value=horizon),
                         min_size=2 * n_windows, max_size=2 * n_windows,
                         unique=True))
    cuts = sorted(cuts)
    spans = []
    for k in range(n_windows):
        a, b = cuts[2 * k], cuts[2 * k + 1]
        node = draw(st.integers(min_value=1, max_value=dim))
        spans.append((node, a, b))
    return horizon, dim, spans


class TestPartition:
    def test_two_sine_windows_layout(self):
        sched = _schedule((1, 101, 200), (2, 301, 400))
        part = vc.partition(sched, 500, 5)
        assert part.intervened[1] == frozenset(range(101, 201))
        assert part.intervened[2] == frozenset(range(301, 401))
        expected_obs = frozenset(range(1, 501)) - part.intervened[1] - part.intervened[2]
        assert part.observational == expected_obs
        for i in (3, 4, 5):
            assert part.intervened[i] == frozenset()

    def test_empty_schedule(self):
        part = vc.partition(vc.InterventionSchedule(), 100, 3)
        assert part.observational == frozenset(range(1, 101))
        for i in (1, 2, 3):
            assert part.intervened[i] == frozenset()
            assert part.eligible(i) == frozenset(range(1, 101))

    def test_complement_set_algebra(self):
        part = vc.partition(_schedule((1, 5, 10)), 20, 2)
        assert part.eligible(1) == frozenset(range(1, 21)) - frozenset(range(5, 11))
        assert part.eligible(2) == frozenset(range(1, 21))

    def test_window_beyond_horizon_rejected(self):
        with pytest.raises(vc.ScheduleError, match=r"outside \[1, 8\]"):
            vc.partition(_schedule((1, 5, 10)), 8, 2)

    def test_node_beyond_dim_rejected(self):
        with pytest.raises(vc.DataError, match="node 3"):
            vc.partition(_schedule((3, 2, 4)), 10, 2)

    @settings(max_examples=200, deadline=None)
    @given(schedules())
    def test_partition_properties(self, case):
        horizon, dim, spans = case
        try:
            sched = _schedule(*spans)
        except vc.ScheduleError:
            return  # generated windows may touch; only disjoint ones are valid inputs
        part = vc.partition(sched, horizon, dim)
        blocks = [part.observational] + [part.intervened[i] for i in range(1, dim + 1)]
        # disjoint ...
        for a in range(len(blocks)):
            for b in range(a + 1, len(blocks)):
                assert not (blocks[a] & blocks[b])
        # ... exhaustive ...
        union = frozenset().union(*blocks)
        assert union == frozenset(range(1, horizon + 1))
        # ... and the complement identity holds
        for i in range(1, dim + 1):
            assert part.eligible(i) == union - part.intervened[i]

    def test_order_independence(self):
        spans = [(1, 3, 5), (2, 9, 12), (1, 20, 21)]
        a = vc.partition(_schedule(*spans), 30, 3)
        b = vc.partition(_schedule(*reversed(spans)), 30, 3)
        assert a.observational == b.observational
        assert a.intervened == b.intervened


class TestBuildRows:
    def test_count_without_interventions(self):
        rec = vc.Recording(values=np.random.default_rng(0).normal(size=(12, 3)), lag=2)
        part = vc.partition(vc.InterventionSchedule(), 12, 3)
        for node in (1, 2, 3):
            assert len(vc.build_rows([(rec, part)], node, 2)) == 10

    def test_count_with_intervention_window(self):
        horizon, lag = 500, 2
        rec = vc.Recording(values=np.zeros((horizon, 2)), lag=lag)
        part = vc.partition(_schedule((1, 101, 200)), horizon, 2)
        rows = vc.build_rows([(rec, part)], 1, lag)
        # oracle: enumerate eligible steps directly
        expected = sum(1 for t in range(lag + 1, horizon + 1)
                       if not 101 <= t <= 200)
        assert expected == 398
        assert len(rows) == expected
        assert all(not 101 <= r.t <= 200 for r in rows)

    def test_counts_concatenate_across_trials(self):
        rng = np.random.default_rng(1)
        recs = [vc.Recording(values=rng.normal(size=(n, 2)), lag=1) for n in (50, 60)]
        parts = [vc.partition(vc.InterventionSchedule(), n, 2) for n in (50, 60)]
        rows = vc.build_rows(list(zip(recs, parts)), 1, 1)
        assert len(rows) == 49 + 59

    def test_regressor_content(self):
        rng = np.random.default_rng(3)
        vals = rng.normal(size=(9, 2))
        rec = vc.Recording(values=vals, lag=2)
        part = vc.partition(vc.InterventionSchedule(), 9, 2)
        rows = vc.build_rows([(rec, part)], 2, 2)
        for row in rows:
            t = row.t
            expected = np.r_[vals[t - 2], vals[t - 3]]  # x(t-1) block then x(t-2)
            assert_array_equal(row.regressor, expected)
            assert row.response == vals[t - 1, 1]

    def test_intervened_steps_still_serve_other_nodes(self):
        rec = vc.Recording(values=np.zeros((30, 2)), lag=1)
        part = vc.partition(_schedule((1, 10, 15)), 30, 2)
        times_node2 = {r.t for r in vc.build_rows([(rec, part)], 2, 1)}
        assert set(range(10, 16)) <= times_node2

    def test_too_short_recording_rejected(self):
        rec = vc.Recording(values=np.zeros((2, 2)), lag=2)
        part = vc.partition(vc.InterventionSchedule(), 2, 2)
        with pytest.raises(vc.DataError, match="too short"):
            vc.build_rows([(rec, part)], 1, 2)

    def test_dimension_mismatch_across_trials(self):
        a = vc.Recording(values=np.zeros((10, 2)), lag=1)
        b = vc.Recording(values=np.zeros((10, 3)), lag=1)
        pa = vc.partition(vc.InterventionSchedule(), 10, 2)
        pb = vc.partition(vc.InterventionSchedule(), 10, 3)
        with pytest.raises(vc.DataError, match="disagree"):
            vc.build_rows([(a, pa), (b, pb)], 1, 1)


class TestRecordingCsv:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        rec = vc.Recording(values=rng.normal(size=(10, 3)),
                           noise=rng.normal(size=(10, 3)), lag=2)
        vc.save_recording(rec, tmp_path / "r.csv", tmp_path / "w.csv")
        back = vc.load_recording(tmp_path / "r.csv", lag=2, noise_path=tmp_path / "w.csv")
        assert_array_equal(back.values, rec.values)
        assert_array_equal(back.noise, rec.noise)

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1,y2\n1,0.0,0.0\n")
        with pytest.raises(vc.FormatError, match="expected column 'x2'"):
            vc.load_recording(path)

    def test_time_jump_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1\n1,0.0\n2,0.0\n3,0.0\n4,0.0\n5,0.0\n7,0.0\n")
        with pytest.raises(vc.FormatError, match="t=7"):
            vc.load_recording(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1,x2\n1,0.0,0.0\n2,0.0\n")
        with pytest.raises(vc.FormatError, match="line 3"):
            vc.load_recording(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,x1\n1,zap\n")
        with pytest.raises(vc.FormatError, match="line 2"):
            vc.load_recording(path)


class TestPartitionExport:
    def test_ranges_rendering(self):
        part = vc.partition(_schedule((1, 3, 5), (2, 9, 9)), 12, 2)
        text = vc.format_partition(part)
        assert "node1: 3-5" in text
        assert "node2: 9" in text
        assert "observational: 1-2,6-8,10-12" in text
