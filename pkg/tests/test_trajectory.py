"""Data model, JSON round trips, and stratified splitting."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubescore.errors import (
    ClassTooSmall,
    InvariantViolation,
    MalformedJson,
    SchemaViolation,
    UnlabeledSample,
)
from cubescore.trajectory import (
    Dataset,
    Split,
    SubjectMeta,
    TrajectoryPoint,
    TrajectorySample,
    parse_trajectory_json,
    serialize_trajectory,
    split_dataset,
)

MINIMAL = '{"id":"s1","points":[{"x":0,"y":0,"t":0},{"x":1,"y":0,"t":8}]}'


def make_sample(sid="s", n=10, label=None, meta=SubjectMeta(), dt=8.0):
    pts = tuple(TrajectoryPoint(x=float(i), y=float(i % 3), t=i * dt) for i in range(n))
    return TrajectorySample(id=sid, points=pts, label=label, meta=meta)


class TestParse:
    def test_minimal(self):
        s = parse_trajectory_json(MINIMAL)
        assert s.id == "s1"
        assert len(s) == 2
        assert s.label is None
        assert s.points[1] == TrajectoryPoint(x=1.0, y=0.0, t=8.0)

    def test_decreasing_timestamps_rejected(self):
        doc = '{"id":"s1","points":[{"x":0,"y":0,"t":8},{"x":1,"y":0,"t":4}]}'
        with pytest.raises(InvariantViolation):
            parse_trajectory_json(doc)

    def test_full_schema(self):
        points = [{"x": i, "y": 0, "t": i * 10} for i in range(10)]
        doc = json.dumps(
            {"id": "p7", "label": 3, "meta": {"age": 25, "education_years": 16}, "points": points}
        )
        s = parse_trajectory_json(doc)
        assert s.label == 3
        assert s.meta.age == 25
        assert s.meta.education_years == 16
        assert s.meta.group is None

    def test_not_json(self):
        with pytest.raises(MalformedJson):
            parse_trajectory_json("{nope")

    def test_missing_field(self):
        with pytest.raises(SchemaViolation):
            parse_trajectory_json('{"points":[]}')

    def test_wrong_type(self):
        with pytest.raises(SchemaViolation):
            parse_trajectory_json('{"id":"a","points":[{"x":"zero","y":0,"t":0}]}')

    def test_nonfinite_rejected(self):
        with pytest.raises(InvariantViolation):
            parse_trajectory_json('{"id":"a","points":[{"x":NaN,"y":0,"t":0},{"x":1,"y":0,"t":1}]}')

    def test_single_point_rejected(self):
        with pytest.raises(InvariantViolation):
            parse_trajectory_json('{"id":"a","points":[{"x":0,"y":0,"t":0}]}')

    def test_bad_label(self):
        doc = '{"id":"a","label":7,"points":[{"x":0,"y":0,"t":0},{"x":1,"y":0,"t":1}]}'
        with pytest.raises(InvariantViolation):
            parse_trajectory_json(doc)

    def test_bad_group(self):
        doc = (
            '{"id":"a","meta":{"group":"XX"},'
            '"points":[{"x":0,"y":0,"t":0},{"x":1,"y":0,"t":1}]}'
        )
        with pytest.raises(InvariantViolation):
            parse_trajectory_json(doc)

    def test_negative_time_rejected(self):
        with pytest.raises(InvariantViolation):
            TrajectoryPoint(x=0.0, y=0.0, t=-1.0)


class TestRoundTrip:
    def test_minimal_round_trip(self):
        s = parse_trajectory_json(MINIMAL)
        assert parse_trajectory_json(serialize_trajectory(s)) == s

    def test_large_round_trip_with_strokes(self):
        pts = tuple(
            TrajectoryPoint(x=i * 0.5, y=500 - i * 0.25, t=i * 7.75, stroke_id=i // 100)
            for i in range(500)
        )
        s = TrajectorySample(id="big", points=pts, label=2, meta=SubjectMeta(age=70, group="MCI"))
        assert parse_trajectory_json(serialize_trajectory(s)) == s

    def test_binary_fraction_exact(self):
        pts = (TrajectoryPoint(x=12.625, y=0.1, t=0.0), TrajectoryPoint(x=1e-3, y=7.0, t=3.5))
        s = TrajectorySample(id="frac", points=pts)
        back = parse_trajectory_json(serialize_trajectory(s))
        assert back.points[0].x == 12.625
        assert back.points[0].y == 0.1
        assert back == s

    @given(
        st.lists(
            st.tuples(
                st.floats(-1e6, 1e6, allow_nan=False),
                st.floats(-1e6, 1e6, allow_nan=False),
                st.floats(0, 1e5, allow_nan=False),
            ),
            min_size=2,
            max_size=40,
        ),
        st.sampled_from([None, 0, 1, 2, 3]),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, triples, label):
        triples = sorted(triples, key=lambda p: p[2])
        pts = tuple(TrajectoryPoint(x=x, y=y, t=t) for x, y, t in triples)
        s = TrajectorySample(id="prop", points=pts, label=label)
        assert parse_trajectory_json(serialize_trajectory(s)) == s


class TestDataset:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(InvariantViolation):
            Dataset(samples=(make_sample("a"), make_sample("a")))

    def test_class_counts(self):
        ds = Dataset(samples=tuple(make_sample(f"s{i}", label=i % 4) for i in range(8)))
        assert ds.class_counts() == {0: 2, 1: 2, 2: 2, 3: 2}


def _dataset_with_counts(counts):
    samples = []
    for label, count in enumerate(counts):
        for i in range(count):
            samples.append(make_sample(f"c{label}_{i}", label=label))
    return Dataset(samples=tuple(samples))


class TestSplit:
    def test_table_totals(self):
        ds = _dataset_with_counts((48, 67, 67, 42))
        out = split_dataset(ds, (0.8, 0.1, 0.1), seed=11)
        assert len(out.subset(Split.TRAIN)) == 178
        assert len(out.subset(Split.VALIDATE)) == 23
        assert len(out.subset(Split.TEST)) == 23

    def test_per_class_allocation(self):
        ds = _dataset_with_counts((48, 67, 67, 42))
        out = split_dataset(ds, (0.8, 0.1, 0.1), seed=3)
        per_class = {c: [0, 0, 0] for c in range(4)}
        for s, a in zip(out.samples, out.assignments):
            per_class[s.label][(Split.TRAIN, Split.VALIDATE, Split.TEST).index(a)] += 1
        assert per_class[0] == [38, 5, 5]
        assert per_class[1] == [53, 7, 7]
        assert per_class[2] == [53, 7, 7]
        assert per_class[3] == [34, 4, 4]

    def test_exact_division(self):
        ds = _dataset_with_counts((10, 10, 10, 10))
        out = split_dataset(ds, (0.8, 0.1, 0.1), seed=0)
        for c in range(4):
            members = [a for s, a in zip(out.samples, out.assignments) if s.label == c]
            assert members.count(Split.TRAIN) == 8
            assert members.count(Split.VALIDATE) == 1
            assert members.count(Split.TEST) == 1

    def test_deterministic(self):
        ds = _dataset_with_counts((12, 9, 15, 6))
        a = split_dataset(ds, (0.8, 0.1, 0.1), seed=42)
        b = split_dataset(ds, (0.8, 0.1, 0.1), seed=42)
        assert a.assignments == b.assignments

    def test_train_fraction_within_one(self):
        for counts in ((5, 7, 11, 13), (30, 3, 40, 9)):
            ds = _dataset_with_counts(counts)
            out = split_dataset(ds, (0.8, 0.1, 0.1), seed=1)
            for c, n in enumerate(counts):
                n_train = sum(
                    1
                    for s, a in zip(out.samples, out.assignments)
                    if s.label == c and a is Split.TRAIN
                )
                assert abs(n_train - 0.8 * n) <= 1

    def test_unlabeled_rejected(self):
        ds = Dataset(samples=(make_sample("u"), make_sample("v", label=1)))
        with pytest.raises(UnlabeledSample):
            split_dataset(ds, (0.8, 0.1, 0.1), seed=0)

    def test_class_too_small(self):
        ds = _dataset_with_counts((2, 5, 5, 5))
        with pytest.raises(ClassTooSmall):
            split_dataset(ds, (0.8, 0.1, 0.1), seed=0)

    def test_bad_ratios(self):
        ds = _dataset_with_counts((5, 5, 5, 5))
        with pytest.raises(InvariantViolation):
            split_dataset(ds, (0.5, 0.1, 0.1), seed=0)
