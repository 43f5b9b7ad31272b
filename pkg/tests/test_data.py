import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vocalrqa.data import (
    Cohort,
    CohortFeatureTable,
    DataError,
    LabelRecord,
    TrajectoryMatrix,
    load_manifest,
    load_trajectory,
    parse_trajectory_text,
    subsample_frames,
    write_cohort,
    write_trajectory,
)


def _traj(pid, T=5, C=2, seed=0):
    return TrajectoryMatrix(pid, np.random.default_rng(seed).standard_normal((T, C)))


def test_load_trajectory_plain(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,4\n5,6\n")
    t = load_trajectory(p)
    assert (t.frame_count, t.channel_count) == (3, 2)
    np.testing.assert_array_equal(t.values, [[1, 2], [3, 4], [5, 6]])
    assert t.parse_warnings == 0


def test_load_trajectory_single_row(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n")
    with pytest.raises(DataError, match="fewer than 2 frames"):
        load_trajectory(p)


def test_blank_cell_becomes_nan_with_warning(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,\n5,6\n")
    t = load_trajectory(p)
    assert np.isnan(t.values[1, 1])
    assert np.isnan(t.values).sum() == 1
    assert t.parse_warnings == 1


def test_literal_nan_is_not_a_warning():
    t = parse_trajectory_text("1,NaN\n3,4\n")
    assert np.isnan(t.values[0, 1]) and t.parse_warnings == 0


def test_header_autodetected_and_other_delimiters():
    t = parse_trajectory_text("f0\tenergy\n1\t2\n3\t4\n")
    assert t.values.shape == (2, 2)
    t = parse_trajectory_text("1 2 3\n4 5 6\n")
    assert t.values.shape == (2, 3)


def test_infinity_becomes_missing():
    t = parse_trajectory_text("1,-inf\n3,4\n")
    assert np.isnan(t.values[0, 1]) and t.parse_warnings == 1


@pytest.mark.parametrize(
    "text,match",
    [("1,2\n3\n", "inconsistent row widths"), ("", "empty")],
)
def test_malformed_trajectory(text, match):
    with pytest.raises(DataError, match=match):
        parse_trajectory_text(text)


def test_expected_channels_mismatch(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,4\n")
    with pytest.raises(DataError, match="expected 3 channels"):
        load_trajectory(p, expected_channels=3)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_trajectory(tmp_path / "nope.csv")


def test_trajectory_is_immutable():
    t = _traj("a")
    with pytest.raises(ValueError):
        t.values[0, 0] = 1.0


finite_floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.one_of(finite_floats, st.just(float("nan"))), min_size=3, max_size=3), min_size=2, max_size=12))
def test_roundtrip_bitwise(tmp_path_factory, rows):
    t = TrajectoryMatrix("x", np.array(rows))
    p = tmp_path_factory.mktemp("rt") / "x.csv"
    write_trajectory(t, p)
    back = load_trajectory(p)
    assert np.array_equal(np.isnan(back.values), np.isnan(t.values))
    fin = ~np.isnan(t.values)
    assert back.values[fin].tobytes() == t.values[fin].tobytes()


def _write_manifest(tmp_path, rows, trajs=None):
    (tmp_path / "t").mkdir(exist_ok=True)
    lines = ["participant_id,path,label"]
    for i, (pid, lab) in enumerate(rows):
        t = (trajs or {}).get(pid, _traj(pid, seed=i))
        write_trajectory(t, tmp_path / "t" / f"{pid}.csv")
        lines.append(f"{pid},t/{pid}.csv,{lab}")
    (tmp_path / "m.csv").write_text("\n".join(lines) + "\n")
    return tmp_path / "m.csv"


def test_load_manifest_preserves_order(tmp_path):
    rows = [("d", 1), ("a", 0), ("c", 1), ("b", 0)]
    cohort = load_manifest(_write_manifest(tmp_path, rows))
    assert len(cohort) == 4
    assert cohort.participant_ids == ["d", "a", "c", "b"]
    np.testing.assert_array_equal(cohort.labels, [1, 0, 1, 0])


def test_load_manifest_threaded_same_order(tmp_path):
    rows = [(f"p{i}", i % 2) for i in range(12)]
    m = _write_manifest(tmp_path, rows)
    a = load_manifest(m)
    b = load_manifest(m, threads=4)
    assert a.participant_ids == b.participant_ids
    for (ta, _), (tb, _) in zip(a.members, b.members):
        assert np.array_equal(ta.values, tb.values)


def test_manifest_duplicate_id(tmp_path):
    m = _write_manifest(tmp_path, [("a", 0), ("b", 1)])
    m.write_text(m.read_text() + "a,t/a.csv,1\n")
    with pytest.raises(DataError, match="duplicate"):
        load_manifest(m)


def test_manifest_single_class(tmp_path):
    with pytest.raises(DataError, match="both classes"):
        load_manifest(_write_manifest(tmp_path, [("a", 0), ("b", 0)]))


def test_manifest_bad_label(tmp_path):
    m = _write_manifest(tmp_path, [("a", 0), ("b", 1)])
    m.write_text(m.read_text() + "c,t/a.csv,2\n")
    with pytest.raises(DataError, match="label"):
        load_manifest(m)


def test_manifest_missing_file(tmp_path):
    m = _write_manifest(tmp_path, [("a", 0), ("b", 1)])
    m.write_text(m.read_text() + "c,t/zzz.csv,1\n")
    with pytest.raises(DataError, match="not found"):
        load_manifest(m)


def test_manifest_channel_mismatch(tmp_path):
    m = _write_manifest(tmp_path, [("a", 0), ("b", 1)], {"b": _traj("b", C=3)})
    with pytest.raises(DataError, match="channel-count mismatch"):
        load_manifest(m)


def test_write_cohort_roundtrip(tmp_path):
    members = [(_traj(p, seed=i), LabelRecord(p, i % 2)) for i, p in enumerate("wxyz")]
    cohort = Cohort(tuple(members))
    back = load_manifest(write_cohort(cohort, tmp_path / "out"))
    assert back.participant_ids == cohort.participant_ids
    for (a, la), (b, lb) in zip(cohort.members, back.members):
        assert a.values.tobytes() == b.values.tobytes() and la == lb


def test_subsample_noop_and_boundary():
    t = _traj("a", T=100)
    assert subsample_frames(t, 200) is t
    t2 = _traj("b", T=2)
    assert subsample_frames(t2, 2) is t2


def test_subsample_stride():
    t = TrajectoryMatrix("a", np.arange(10.0)[:, None])
    s = subsample_frames(t, 5)
    np.testing.assert_array_equal(s.values[:, 0], [0, 2, 4, 6, 8])


@given(st.integers(2, 500), st.integers(2, 100))
def test_subsample_idempotent_and_bounded(T, cap):
    t = TrajectoryMatrix("a", np.arange(float(T))[:, None])
    s = subsample_frames(t, cap)
    assert s.frame_count <= cap and s.values[0, 0] == 0.0
    assert np.all(np.diff(s.values[:, 0]) > 0)
    assert np.array_equal(subsample_frames(s, cap).values, s.values)


def test_feature_table_masks_nonfinite():
    tab = CohortFeatureTable(("a", "b"), [0, 1], [[1.0, np.nan], [2.0, 3.0]], ("f1", "f2"))
    np.testing.assert_array_equal(tab.valid_mask, [[True, False], [True, True]])
    with pytest.raises(DataError):
        CohortFeatureTable(("a",), [0, 1], [[1.0]], ("f",))
