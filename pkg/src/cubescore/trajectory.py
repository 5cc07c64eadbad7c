"""Pen-trajectory data model, JSON (de)serialization, and dataset splitting.

A drawing is an ordered sequence of ``(x, y, t)`` points in device pixels and
milliseconds. The canonical interchange format is one JSON object per sample:

    {"id": str, "label": int|null,
     "meta": {"age": int|null, "education_years": int|null,
              "group": "MCI"|"HC"|null, "sex": str|null},
     "points": [{"x": num, "y": num, "t": num, "stroke_id": int|null}, ...]}

Dataset files are JSON-lines: one such object per LF-terminated line, UTF-8.
All types are immutable after construction; all functions here are pure.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ClassTooSmall,
    InvariantViolation,
    MalformedJson,
    SchemaViolation,
    UnlabeledSample,
)

VALID_SCORES = (0, 1, 2, 3)
NUM_CLASSES = len(VALID_SCORES)
VALID_GROUPS = ("MCI", "HC")

AGE_RANGE = (0, 130)
EDUCATION_YEARS_RANGE = (0, 30)


@dataclass(frozen=True, slots=True)
class TrajectoryPoint:
    """One pen sample: position in device pixels, time in ms from drawing start."""

    x: float
    y: float
    t: float
    stroke_id: int | None = None

    def __post_init__(self):
        for name in ("x", "y", "t"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise InvariantViolation(f"point field {name!r} must be finite, got {v!r}")
        if self.t < 0:
            raise InvariantViolation(f"point time must be >= 0, got {self.t}")
        if self.stroke_id is not None and (not isinstance(self.stroke_id, int)
                                           or isinstance(self.stroke_id, bool)
                                           or self.stroke_id < 0):
            raise InvariantViolation(f"stroke_id must be a non-negative int, got {self.stroke_id!r}")


@dataclass(frozen=True, slots=True)
class SubjectMeta:
    """Optional participant attributes used by cohort statistics."""

    age: int | None = None
    education_years: int | None = None
    group: str | None = None
    sex: str | None = None

    def __post_init__(self):
        if self.age is not None and not AGE_RANGE[0] <= self.age <= AGE_RANGE[1]:
            raise InvariantViolation(f"age {self.age} outside {AGE_RANGE}")
        if self.education_years is not None and not (
            EDUCATION_YEARS_RANGE[0] <= self.education_years <= EDUCATION_YEARS_RANGE[1]
        ):
            raise InvariantViolation(
                f"education_years {self.education_years} outside {EDUCATION_YEARS_RANGE}"
            )
        if self.group is not None and self.group not in VALID_GROUPS:
            raise InvariantViolation(f"group must be one of {VALID_GROUPS}, got {self.group!r}")


@dataclass(frozen=True)
class TrajectorySample:
    """One labeled (or unlabeled, at inference) drawing trajectory."""

    id: str
    points: tuple[TrajectoryPoint, ...]
    label: int | None = None
    meta: SubjectMeta = field(default_factory=SubjectMeta)

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise InvariantViolation("sample id must be a non-empty string")
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) < 2:
            raise InvariantViolation(f"sample {self.id!r} needs >= 2 points, got {len(self.points)}")
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.t < prev.t:
                raise InvariantViolation(
                    f"sample {self.id!r} has decreasing timestamps ({prev.t} -> {cur.t})"
                )
        if self.label is not None and self.label not in VALID_SCORES:
            raise InvariantViolation(f"label must be in {VALID_SCORES}, got {self.label!r}")

    def __len__(self) -> int:
        return len(self.points)


class Split(enum.Enum):
    TRAIN = "train"
    VALIDATE = "validate"
    TEST = "test"
    UNASSIGNED = "unassigned"


@dataclass(frozen=True)
class Dataset:
    """A collection of samples with an optional train/validate/test assignment."""

    samples: tuple[TrajectorySample, ...]
    assignments: tuple[Split, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.assignments:
            object.__setattr__(self, "assignments", (Split.UNASSIGNED,) * len(self.samples))
        else:
            object.__setattr__(self, "assignments", tuple(self.assignments))
        if len(self.assignments) != len(self.samples):
            raise InvariantViolation("one split assignment required per sample")
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise InvariantViolation(f"duplicate sample id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    def subset(self, split: Split) -> list[TrajectorySample]:
        return [s for s, a in zip(self.samples, self.assignments) if a is split]

    def class_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {c: 0 for c in VALID_SCORES}
        for s in self.samples:
            if s.label is not None:
                counts[s.label] += 1
        return counts


# ---------------------------------------------------------------------------
# JSON parsing / serialization


def _require(obj: dict, key: str, kinds, what: str, optional: bool = False):
    if key not in obj or obj[key] is None:
        if optional:
            return None
        raise SchemaViolation(f"{what}: missing required field {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, kinds):
        raise SchemaViolation(f"{what}: field {key!r} has wrong type {type(v).__name__}")
    return v


def _parse_meta(obj) -> SubjectMeta:
    if obj is None:
        return SubjectMeta()
    if not isinstance(obj, dict):
        raise SchemaViolation("meta must be an object")
    return SubjectMeta(
        age=_require(obj, "age", int, "meta", optional=True),
        education_years=_require(obj, "education_years", int, "meta", optional=True),
        group=_require(obj, "group", str, "meta", optional=True),
        sex=_require(obj, "sex", str, "meta", optional=True),
    )


def parse_trajectory_json(text: str | bytes) -> TrajectorySample:
    """Parse one canonical trajectory JSON document into a validated sample.

    Raises MalformedJson for unparseable input, SchemaViolation for missing or
    mistyped fields, and InvariantViolation for order/range/finiteness breaks.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedJson(f"input is not UTF-8: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedJson(f"invalid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise SchemaViolation("top-level JSON value must be an object")

    sample_id = _require(obj, "id", str, "sample")
    raw_points = _require(obj, "points", list, f"sample {sample_id!r}")
    points = []
    for i, p in enumerate(raw_points):
        if not isinstance(p, dict):
            raise SchemaViolation(f"sample {sample_id!r}: point {i} must be an object")
        what = f"sample {sample_id!r} point {i}"
        points.append(
            TrajectoryPoint(
                x=float(_require(p, "x", (int, float), what)),
                y=float(_require(p, "y", (int, float), what)),
                t=float(_require(p, "t", (int, float), what)),
                stroke_id=_require(p, "stroke_id", int, what, optional=True),
            )
        )
    label = _require(obj, "label", int, f"sample {sample_id!r}", optional=True)
    meta = _parse_meta(obj.get("meta"))
    return TrajectorySample(id=sample_id, points=tuple(points), label=label, meta=meta)


def serialize_trajectory(sample: TrajectorySample) -> str:
    """Serialize a sample to its canonical JSON form (full schema, fixed key order).

    Round trip is the identity: parsing the result reproduces the sample
    field-for-field, including exact float coordinate values.
    """
    doc = {
        "id": sample.id,
        "label": sample.label,
        "meta": {
            "age": sample.meta.age,
            "education_years": sample.meta.education_years,
            "group": sample.meta.group,
            "sex": sample.meta.sex,
        },
        "points": [
            {"x": p.x, "y": p.y, "t": p.t, "stroke_id": p.stroke_id} for p in sample.points
        ],
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))


def save_dataset(samples, path) -> None:
    """Write samples as JSON-lines (one object per line, LF endings, UTF-8)."""
    if isinstance(samples, Dataset):
        samples = samples.samples
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(serialize_trajectory(s))
            fh.write("\n")


def load_dataset(path) -> Dataset:
    """Read a JSON-lines dataset file into a validated Dataset."""
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                samples.append(parse_trajectory_json(line))
            except MalformedJson as e:
                raise MalformedJson(f"{path}:{lineno}: {e}") from e
    return Dataset(samples=tuple(samples))


# ---------------------------------------------------------------------------
# Stratified splitting


def _largest_remainder(n: int, ratios: tuple[float, float, float]) -> list[int]:
    # Allocate n into integer buckets matching ratios; remainders granted by
    # size, ties by bucket order (train before validate before test).
    exact = [n * r for r in ratios]
    alloc = [math.floor(e) for e in exact]
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - alloc[i]), i))
    for i in range(n - sum(alloc)):
        alloc[order[i]] += 1
    return alloc


def split_dataset(data: Dataset, ratios: tuple[float, float, float], seed: int) -> Dataset:
    """Assign every sample to train/validate/test, stratified per class.

    Within each class the sample order is permuted with a seeded RNG and then
    partitioned, so the result is deterministic for a fixed seed and each class
    count lands within one sample of the exact stratified target.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvariantViolation(f"ratios must be 3 non-negative values summing to 1, got {ratios}")
    for s in data.samples:
        if s.label is None:
            raise UnlabeledSample(f"sample {s.id!r} has no label; cannot stratify")
    by_class: dict[int, list[int]] = {c: [] for c in VALID_SCORES}
    for idx, s in enumerate(data.samples):
        by_class[s.label].append(idx)
    for c, members in by_class.items():
        if 0 < len(members) < 3:
            raise ClassTooSmall(f"class {c} has {len(members)} samples; need >= 3")

    rng = np.random.default_rng(seed)
    assignments = [Split.UNASSIGNED] * len(data.samples)
    for c in VALID_SCORES:
        members = by_class[c]
        if not members:
            continue
        perm = rng.permutation(len(members))
        n_train, n_val, _ = _largest_remainder(len(members), tuple(ratios))
        for rank, j in enumerate(perm):
            if rank < n_train:
                split = Split.TRAIN
            elif rank < n_train + n_val:
                split = Split.VALIDATE
            else:
                split = Split.TEST
            assignments[members[j]] = split
    return replace(data, assignments=tuple(assignments))
