import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from inflacast import labeler
from inflacast.corpus import PostRecord
from inflacast.fixtures import make_series
from inflacast.labeler import Breakpoint, ExtremaConfig, InflationSeries, Kind, LabelingError
from inflacast.months import CORPUS_START, Month


def S(values, start=CORPUS_START):
    return InflationSeries(start, tuple(values))


def kinds_at(bps):
    return [(b.index, b.kind) for b in bps]


# --- raw extrema ---------------------------------------------------------------

def test_raw_single_peak():
    assert kinds_at(labeler.find_raw_extrema(S([1, 2, 3, 2, 1]))) == [(2, Kind.MAXIMUM)]


def test_raw_monotone_is_empty():
    assert labeler.find_raw_extrema(S(range(10))) == []


def test_raw_plateau_gives_nothing():
    assert labeler.find_raw_extrema(S([1, 2, 2, 1])) == []


def test_raw_too_short():
    with pytest.raises(LabelingError):
        labeler.find_raw_extrema(S([1, 2]), order=1)


def _scan_oracle(v, order):
    out = []
    n = len(v)
    for i in range(1, n - 1):
        nb = [v[j] for j in range(i - order, i + order + 1) if j != i and 0 <= j < n]
        if all(v[i] > x for x in nb):
            out.append((i, Kind.MAXIMUM))
        elif all(v[i] < x for x in nb):
            out.append((i, Kind.MINIMUM))
    return out


@pytest.mark.parametrize("order", [1, 2, 3])
def test_raw_matches_window_scan(order):
    v = np.random.default_rng(5).normal(size=60).round(2)
    assert kinds_at(labeler.find_raw_extrema(S(v), order)) == _scan_oracle(list(v), order)


# --- smoothing -----------------------------------------------------------------

def test_smooth_close_maxima_keep_more_deviant():
    # mean of this series is 2.0; maxima at 2 (5.0) and 3 (9.0)
    v = [0.0, 0.0, 5.0, 9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 12.0]
    s = S(v)
    assert np.mean(v) == pytest.approx(2.0)
    raw = [Breakpoint(2, s.month_at(2), Kind.MAXIMUM), Breakpoint(3, s.month_at(3), Kind.MAXIMUM)]
    out = labeler.smooth_extrema(raw, s)
    assert [b.index for b in out] == [3]


def test_smooth_fixed_point():
    v = [0, 1, 5, 1, 0, -3, 0, 1, 6, 1, 0]
    s = S(v)
    raw = labeler.find_raw_extrema(s)
    assert kinds_at(raw) == [(2, Kind.MAXIMUM), (5, Kind.MINIMUM), (8, Kind.MAXIMUM)]
    assert labeler.smooth_extrema(raw, s) == raw


def test_smooth_tie_keeps_earlier():
    v = [0.0, 4.0, 0.0, 4.0, 0.0]  # mean 1.6, equal deviations
    s = S(v)
    raw = [Breakpoint(1, s.month_at(1), Kind.MAXIMUM), Breakpoint(3, s.month_at(3), Kind.MAXIMUM)]
    assert [b.index for b in labeler.smooth_extrema(raw, s)] == [1]


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=5, max_size=80), st.integers(0, 6))
def test_smooth_alternates_and_respects_window(values, window):
    s = S(values)
    out = labeler.detect_breakpoints(s, ExtremaConfig(merge_window_months=window))
    for a, b in zip(out, out[1:]):
        assert a.kind is not b.kind
        assert b.index - a.index >= window
        assert b.index > a.index


# --- labels --------------------------------------------------------------------

def test_labels_single_peak_and_trough():
    assert labeler.label_series(S([1, 2, 3, 2, 1])).labels == (1, 1, 1, 0, 0)
    assert labeler.label_series(S([3, 2, 1, 2, 3])).labels == (0, 0, 0, 1, 1)


def test_labels_require_breakpoints():
    with pytest.raises(LabelingError):
        labeler.assign_labels(S([1, 2, 3]), [])


def test_labels_reject_non_alternating():
    s = S(range(10))
    bad = [Breakpoint(2, s.month_at(2), Kind.MAXIMUM), Breakpoint(5, s.month_at(5), Kind.MAXIMUM)]
    with pytest.raises(LabelingError):
        labeler.assign_labels(s, bad)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=5, max_size=80))
def test_label_runs_equal_segments(values):
    s = S(values)
    bps = labeler.detect_breakpoints(s)
    if not bps:
        return
    tl = labeler.assign_labels(s, bps)
    changes = [i for i in range(1, len(s)) if tl.labels[i] != tl.labels[i - 1]]
    # changes happen exactly right after each breakpoint that is not the last month
    assert changes == [b.index + 1 for b in bps if b.index + 1 < len(s)]
    n_runs = len(changes) + 1
    assert n_runs == len(set(tl.segment_ids))


@given(st.lists(st.integers(-50, 50), min_size=5, max_size=60), st.integers(-100, 100))
def test_labels_shift_invariant(values, c):
    # integers keep the shifted comparison exact
    s = S([float(x) for x in values])
    bps = labeler.detect_breakpoints(s)
    bps_c = labeler.detect_breakpoints(s.shifted(float(c)))
    assert kinds_at(bps) == kinds_at(bps_c)
    if bps:
        assert labeler.assign_labels(s, bps).labels == labeler.assign_labels(s.shifted(c), bps_c).labels


def test_planted_extrema_recovered():
    for seed in range(20):
        s, planted = make_series(np.random.default_rng(seed))
        assert kinds_at(labeler.detect_breakpoints(s)) == kinds_at(planted)


def test_label_posts_and_range_error():
    s = S([1, 2, 3, 2, 1])
    tl = labeler.label_series(s)
    p = PostRecord("1", "g", "x", s.month_at(1))
    assert labeler.label_posts([p], tl) == [(p, 1)]
    late = PostRecord("2", "g", "x", s.end_month.shift(1))
    with pytest.raises(LabelingError, match=str(s.end_month.shift(1))):
        labeler.label_posts([late], tl)


def test_label_posts_against_hash_map():
    rng = np.random.default_rng(3)
    start = Month(2015, 1)
    s = S(np.cumsum(rng.normal(size=24)), start)
    tl = labeler.label_series(s)
    oracle = {str(s.month_at(i)): lab for i, lab in enumerate(tl.labels)}
    posts = [PostRecord(str(i), "g", "t", start.shift(int(rng.integers(24)))) for i in range(500)]
    out = labeler.label_posts(posts, tl)
    assert [p.post_id for p, _ in out] == [p.post_id for p in posts]
    assert all(lab == oracle[str(p.month)] for p, lab in out)


# --- I/O -----------------------------------------------------------------------

def test_series_roundtrip_and_sorting(tmp_path):
    s, _ = make_series(np.random.default_rng(1))
    labeler.write_series(tmp_path / "s.csv", s)
    assert labeler.read_series(tmp_path / "s.csv") == s
    (tmp_path / "u.csv").write_text("month,value_pct\n2010-02,\"0,5\"\n2010-01,0.25\n", encoding="utf-8")
    u = labeler.read_series(tmp_path / "u.csv")
    assert u.start_month == Month(2010, 1) and u.values == (0.25, 0.5)


def test_series_gap_rejected(tmp_path):
    (tmp_path / "g.csv").write_text("month,value_pct\n2010-01,1\n2010-03,2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="consecutive"):
        labeler.read_series(tmp_path / "g.csv")


def test_labeling_export(tmp_path):
    s = S([1, 2, 3, 2, 1])
    tl = labeler.label_series(s)
    labeler.write_labeling(tmp_path / "l.csv", tl)
    lines = (tmp_path / "l.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "month,label,segment_id,breakpoint_kind_if_any"
    assert lines[3] == "2010-03,1,0,maximum"
    assert lines[4] == "2010-04,0,1,"
