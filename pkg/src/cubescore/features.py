"""Segment-based feature extraction for drawing trajectories.

A trajectory is cut into disjoint consecutive blocks of 5 points. Each block
yields 14 values, in fixed row order:

    rows  0..9   interleaved block coordinates (x1, y1, ..., x5, y5)
    row   10     summed adjacent-point Euclidean distance within the block
    row   11     cosine similarity of this block's coordinate vector with the
                 next block's (the final block gets the neutral value 1.0)
    row   12     mean velocity: distance / block time span (0 when the span is 0)
    row   13     mean acceleration over the block's three interior points

Per-block feature rows are then linearly resampled over the segment index to a
standard length so every sample becomes one fixed-shape matrix. Conventions
chosen for degenerate inputs (duplicate timestamps, zero-magnitude vectors)
are documented on the individual functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateVector,
    EmptyInput,
    SampleExtractionError,
    ShapeMismatch,
    TooFewSegments,
    TooShort,
)
from .errors import CubescoreError
from .trajectory import Dataset, TrajectoryPoint, TrajectorySample

SEGMENT_POINTS = 5
MIN_POINTS = 2 * SEGMENT_POINTS  # need >= 2 segments so cosine similarity is defined
FEATURE_DIM = 14

FEATURE_SET_SCS = "SCS"
FEATURE_SET_M = "M"
FEATURE_SET_SCSM = "SCSM"
FEATURE_SETS = (FEATURE_SET_SCS, FEATURE_SET_M, FEATURE_SET_SCSM)

# Row slice selected by each feature set: coordinates+distance+similarity,
# motion (velocity+acceleration), or everything.
_FEATURE_SET_ROWS = {
    FEATURE_SET_SCS: slice(0, 12),
    FEATURE_SET_M: slice(12, 14),
    FEATURE_SET_SCSM: slice(0, 14),
}

FEATURE_SET_DIMS = {name: sl.stop - sl.start for name, sl in _FEATURE_SET_ROWS.items()}


@dataclass(frozen=True)
class Segment:
    """Exactly 5 consecutive trajectory points plus the segment's index."""

    points: tuple[TrajectoryPoint, ...]
    index: int

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) != SEGMENT_POINTS:
            raise TooShort(f"segment needs exactly {SEGMENT_POINTS} points, got {len(self.points)}")


@dataclass(frozen=True)
class SegmentFeatureRow:
    """The 14 feature values of one segment."""

    seg: tuple[float, ...]
    dis: float
    sim: float
    v: float
    a: float

    def as_list(self) -> list[float]:
        return list(self.seg) + [self.dis, self.sim, self.v, self.a]


@dataclass(frozen=True)
class NormalizationSpec:
    """How per-sample feature rows become one fixed-shape matrix.

    normalize_xy rescales each sample's coordinates to [0, 1] per axis before
    extraction; it defaults off so features stay in raw device units.
    """

    l_std: int
    feature_set: str = FEATURE_SET_SCSM
    normalize_xy: bool = False

    def __post_init__(self):
        if self.l_std < 2:
            raise TooFewSegments(f"l_std must be >= 2, got {self.l_std}")
        if self.feature_set not in FEATURE_SETS:
            raise CubescoreError(f"unknown feature set {self.feature_set!r}")

    @property
    def input_dim(self) -> int:
        return FEATURE_SET_DIMS[self.feature_set]


@dataclass(frozen=True)
class FeatureMatrix:
    """A d x l_std matrix of resampled feature rows (d = 14, 12, or 2)."""

    values: np.ndarray
    l_std: int
    feature_set: str = FEATURE_SET_SCSM

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        expected = FEATURE_SET_DIMS[self.feature_set]
        if arr.shape != (expected, self.l_std):
            raise ShapeMismatch(
                f"{self.feature_set} matrix must be {expected}x{self.l_std}, got {arr.shape}"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


# ---------------------------------------------------------------------------
# Per-segment features. Scalar Python arithmetic on purpose: the golden-matrix
# regression pins these bit-for-bit in f64.


def segment_trajectory(sample: TrajectorySample) -> list[Segment]:
    """Cut a sample into floor(L/5) disjoint 5-point segments, dropping the tail."""
    n = len(sample.points)
    if n < MIN_POINTS:
        raise TooShort(f"sample {sample.id!r} has {n} points; need >= {MIN_POINTS}")
    count = n // SEGMENT_POINTS
    return [
        Segment(points=sample.points[SEGMENT_POINTS * i : SEGMENT_POINTS * (i + 1)], index=i)
        for i in range(count)
    ]


def seg_vector(segment: Segment) -> tuple[float, ...]:
    """Interleaved coordinates (x1, y1, x2, y2, ..., x5, y5)."""
    vec = []
    for p in segment.points:
        vec.append(p.x)
        vec.append(p.y)
    return tuple(vec)


def intra_segment_distance(segment: Segment) -> float:
    """Sum of the four adjacent-point Euclidean step lengths."""
    pts = segment.points
    total = 0.0
    for j in range(SEGMENT_POINTS - 1):
        total += math.hypot(pts[j + 1].x - pts[j].x, pts[j + 1].y - pts[j].y)
    return total


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two 10-vectors, clamped into [-1, 1].

    Raises DegenerateVector when either vector has zero magnitude; callers
    substitute the neutral value 1.0 for degenerate segments.
    """
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        raise DegenerateVector("cosine similarity undefined for a zero-magnitude vector")
    # sqrt of the product (not product of sqrts) so exactly (anti)parallel
    # vectors land on exactly +/-1.
    return min(1.0, max(-1.0, dot / math.sqrt(na * nb)))


def _safe_quotient(num: float, den: float) -> float:
    # Zero or pathologically small time steps are device artifacts, not
    # physical speed; they contribute 0 instead of infinities.
    if den <= 0.0:
        return 0.0
    q = num / den
    return q if math.isfinite(q) else 0.0


def segment_velocity(segment: Segment) -> float:
    """Mean velocity: path length over the first-to-last time span (0 if span is 0)."""
    span = segment.points[-1].t - segment.points[0].t
    return _safe_quotient(intra_segment_distance(segment), span)


def _point_speeds(segment: Segment) -> list[float]:
    # Backward-difference speed per point; the first point has no predecessor
    # and a zero time step is a device artifact, both map to speed 0.
    pts = segment.points
    speeds = [0.0]
    for j in range(1, SEGMENT_POINTS):
        step = math.hypot(pts[j].x - pts[j - 1].x, pts[j].y - pts[j - 1].y)
        speeds.append(_safe_quotient(step, pts[j].t - pts[j - 1].t))
    return speeds


def segment_acceleration(segment: Segment) -> float:
    """Mean of the centered speed differences at the three interior points."""
    pts = segment.points
    speeds = _point_speeds(segment)
    total = 0.0
    for j in (1, 2, 3):
        total += _safe_quotient(speeds[j + 1] - speeds[j - 1], pts[j + 1].t - pts[j - 1].t)
    return total / 3.0


def build_feature_rows(sample: TrajectorySample) -> list[SegmentFeatureRow]:
    """One 14-value row per segment; row i's sim pairs segment i with i+1."""
    segments = segment_trajectory(sample)
    vectors = [seg_vector(s) for s in segments]
    rows = []
    for i, segment in enumerate(segments):
        if i + 1 < len(segments):
            try:
                sim = cosine_similarity(vectors[i], vectors[i + 1])
            except DegenerateVector:
                sim = 1.0
        else:
            sim = 1.0
        rows.append(
            SegmentFeatureRow(
                seg=vectors[i],
                dis=intra_segment_distance(segment),
                sim=sim,
                v=segment_velocity(segment),
                a=segment_acceleration(segment),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Length normalization and batch assembly


def compute_std_length(training_samples) -> int:
    """Standard length = mean segment count of the training samples.

    Rounded half away from zero, floored at 2. Computed on the training split
    only and persisted with the model so inference uses the same value.
    """
    samples = list(training_samples)
    if not samples:
        raise EmptyInput("cannot compute a standard length from zero samples")
    counts = []
    for s in samples:
        n = len(s.points)
        if n < MIN_POINTS:
            raise TooShort(f"sample {s.id!r} has {n} points; need >= {MIN_POINTS}")
        counts.append(n // SEGMENT_POINTS)
    mean = sum(counts) / len(counts)
    return max(2, int(math.floor(mean + 0.5)))


def resample_to_std_length(rows, spec: NormalizationSpec) -> FeatureMatrix:
    """Linearly resample each feature row over segment index onto l_std positions.

    The sampling grid spans [0, n_segments - 1], so the first and last columns
    always equal the original first and last rows, and a matched length is the
    identity.
    """
    rows = list(rows)
    if len(rows) < 2:
        raise TooFewSegments(f"need >= 2 segment rows to resample, got {len(rows)}")
    raw = np.array([r.as_list() for r in rows], dtype=np.float64).T  # (14, n)
    n = raw.shape[1]
    if n == spec.l_std:
        out = raw
    else:
        grid = np.arange(n, dtype=np.float64)
        targets = np.linspace(0.0, float(n - 1), spec.l_std)
        out = np.empty((FEATURE_DIM, spec.l_std), dtype=np.float64)
        for i in range(FEATURE_DIM):
            out[i] = np.interp(targets, grid, raw[i])
    return FeatureMatrix(values=out, l_std=spec.l_std, feature_set=FEATURE_SET_SCSM)


def select_feature_set(matrix: FeatureMatrix, feature_set: str) -> FeatureMatrix:
    """Slice the full 14-row matrix down to the requested feature rows."""
    if matrix.feature_set != FEATURE_SET_SCSM:
        raise ShapeMismatch(f"can only select from a full SCSM matrix, got {matrix.feature_set}")
    if feature_set == FEATURE_SET_SCSM:
        return matrix
    return FeatureMatrix(
        values=matrix.values[_FEATURE_SET_ROWS[feature_set]],
        l_std=matrix.l_std,
        feature_set=feature_set,
    )


def normalize_coordinates(sample: TrajectorySample) -> TrajectorySample:
    """Min-max rescale x and y to [0, 1] per axis (constant axes map to 0)."""
    xs = [p.x for p in sample.points]
    ys = [p.y for p in sample.points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    xspan = x1 - x0
    yspan = y1 - y0
    points = tuple(
        TrajectoryPoint(
            x=(p.x - x0) / xspan if xspan > 0 else 0.0,
            y=(p.y - y0) / yspan if yspan > 0 else 0.0,
            t=p.t,
            stroke_id=p.stroke_id,
        )
        for p in sample.points
    )
    return TrajectorySample(id=sample.id, points=points, label=sample.label, meta=sample.meta)


def extract_features(sample: TrajectorySample, spec: NormalizationSpec) -> FeatureMatrix:
    """Full single-sample pipeline: rows -> standard length -> feature-set rows."""
    if spec.normalize_xy:
        sample = normalize_coordinates(sample)
    rows = build_feature_rows(sample)
    matrix = resample_to_std_length(rows, spec)
    return select_feature_set(matrix, spec.feature_set)


def batch_extract(data, spec: NormalizationSpec) -> list[tuple[FeatureMatrix, int | None]]:
    """Extract every sample, preserving order; failures carry the sample id."""
    samples = data.samples if isinstance(data, Dataset) else list(data)
    out = []
    for sample in samples:
        try:
            out.append((extract_features(sample, spec), sample.label))
        except CubescoreError as e:
            raise SampleExtractionError(sample.id, e) from e
    return out
