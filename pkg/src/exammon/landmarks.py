"""Landmark frame validation and pairwise-distance feature extraction.

Frames carry 478 normalized (x, y) points on the fixed face-mesh topology
(468 surface points + 10 iris points). Features come in three modes:
all raw coordinates, the 19 selected raw coordinates, or the 171 pairwise
distances between the 19 selected points, computed in pixel space and
normalized by the frame diagonal so they are resolution-invariant and
bounded in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import chain
from typing import Any, Mapping

import numpy as np

from .errors import (
    AllZeroLandmarks,
    BadMetadata,
    DegenerateDiagonal,
    OutOfRange,
    WrongPointCount,
)

MESH_POINTS = 478
SELECTION_SIZE = 19


class Label(str, Enum):
    """Frame-level behavior class; Abnormal is the positive class."""

    NORMAL = "normal"
    ABNORMAL = "abnormal"

    @property
    def index(self) -> int:
        return 1 if self is Label.ABNORMAL else 0

    @classmethod
    def from_index(cls, i: int) -> "Label":
        return cls.ABNORMAL if i == 1 else cls.NORMAL


class FeatureMode(str, Enum):
    """Feature selection mode and its dimensionality."""

    RAW478 = "raw478"   # all 478 normalized (x, y) pairs, flattened
    RAW19 = "raw19"     # the 19 selected normalized (x, y) pairs, flattened
    DIST171 = "dist171"  # C(19, 2) diagonal-normalized pixel distances

    @property
    def dims(self) -> int:
        return _MODE_DIMS[self]


_MODE_DIMS = {
    FeatureMode.RAW478: 2 * MESH_POINTS,
    FeatureMode.RAW19: 2 * SELECTION_SIZE,
    FeatureMode.DIST171: SELECTION_SIZE * (SELECTION_SIZE - 1) // 2,
}


@dataclass(frozen=True)
class LandmarkFrame:
    """One webcam frame reduced to 478 normalized 2-D points plus metadata."""

    frame_id: str
    ts_ms: int
    width: int
    height: int
    points: np.ndarray = field(repr=False)  # (478, 2) float64 in [0, 1]

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LandmarkFrame):
            return NotImplemented
        return (
            self.frame_id == other.frame_id
            and self.ts_ms == other.ts_ms
            and self.width == other.width
            and self.height == other.height
            and np.array_equal(self.points, other.points)
        )


@dataclass(frozen=True)
class KeypointSelection:
    """Ordered set of 19 distinct mesh indices (17 facial + 2 iris centers)."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if len(idx) != SELECTION_SIZE:
            raise ValueError(f"selection needs {SELECTION_SIZE} indices, got {len(idx)}")
        if len(set(idx)) != len(idx):
            raise ValueError("selection indices must be distinct")
        if any(i < 0 or i >= MESH_POINTS for i in idx):
            raise ValueError(f"selection indices must lie in [0, {MESH_POINTS})")
        object.__setattr__(self, "indices", idx)


# 17 canonical face-mesh landmarks (nose tip, forehead, lips, eye corners,
# mouth corners, brows, chin, nose root, jaw extremes) + the two iris centers.
DEFAULT_SELECTION = KeypointSelection(
    (1, 10, 13, 14, 33, 61, 70, 133, 152, 168, 199, 234, 263, 291, 300, 362, 454, 468, 473)
)


@dataclass(frozen=True)
class FeatureVector:
    """Numeric features for one frame, tagged with their mode."""

    mode: FeatureMode
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.shape[0] != self.mode.dims:
            raise ValueError(f"{self.mode.value} expects {self.mode.dims} values, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature values must be finite")
        if self.mode is FeatureMode.DIST171 and (vals.min() < 0.0 or vals.max() > 1.0 + 1e-9):
            raise ValueError("normalized distances must lie in [0, 1]")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dims(self) -> int:
        return self.mode.dims

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.mode is other.mode and np.array_equal(self.values, other.values)


def validate_frame(raw: Mapping[str, Any]) -> LandmarkFrame:
    """Validate a candidate frame record and return a LandmarkFrame.

    Rejects the all-zero no-face sentinel, wrong point counts, non-finite or
    out-of-range coordinates, and non-positive frame dimensions.
    """
    landmarks = raw.get("landmarks")
    if landmarks is None:
        raise WrongPointCount("record has no landmarks field")
    if isinstance(landmarks, list):
        # hot path for wire input: one flattening pass instead of np.asarray's
        # nested-list walk (~3x faster per frame)
        if len(landmarks) != MESH_POINTS:
            raise WrongPointCount(f"expected {MESH_POINTS} points, got {len(landmarks)}")
        try:
            if any(len(p) != 2 for p in landmarks):
                raise WrongPointCount("every landmark must be an (x, y) pair")
            points = np.fromiter(
                chain.from_iterable(landmarks), dtype=np.float64, count=2 * MESH_POINTS
            ).reshape(MESH_POINTS, 2)
        except (TypeError, ValueError) as exc:
            raise WrongPointCount(f"landmarks are not a list of (x, y) pairs: {exc}") from None
    else:
        try:
            points = np.asarray(landmarks, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise WrongPointCount(f"landmarks are not a list of (x, y) pairs: {exc}") from None
        if points.ndim != 2 or points.shape[1] != 2:
            raise WrongPointCount(f"expected (x, y) pairs, got shape {points.shape}")
        if points.shape[0] != MESH_POINTS:
            raise WrongPointCount(f"expected {MESH_POINTS} points, got {points.shape[0]}")

    try:
        width = int(raw["width"])
        height = int(raw["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BadMetadata(f"missing or non-integer frame dimensions: {exc}") from None
    if width <= 0 or height <= 0:
        raise BadMetadata(f"frame dimensions must be positive, got {width}x{height}")

    if not np.all(np.isfinite(points)):
        raise OutOfRange("landmark coordinates must be finite")
    if points.min() < 0.0 or points.max() > 1.0:
        raise OutOfRange("landmark coordinates must lie in [0, 1]")

    if not points.any():
        raise AllZeroLandmarks("all 478 points are (0, 0): no face detected")

    points.flags.writeable = False
    return LandmarkFrame(
        frame_id=str(raw.get("id", "")),
        ts_ms=int(raw.get("ts_ms", 0)),
        width=width,
        height=height,
        points=points,
    )


def is_all_zero(landmarks: Any) -> bool:
    """True when every coordinate of the point list is exactly zero."""
    arr = np.asarray(landmarks, dtype=np.float64)
    return arr.size > 0 and not arr.any()


def select_keypoints(frame: LandmarkFrame, sel: KeypointSelection = DEFAULT_SELECTION) -> np.ndarray:
    """Return the selected points scaled to pixel space, in selection order."""
    scale = np.array([frame.width, frame.height], dtype=np.float64)
    return frame.points[list(sel.indices)] * scale


def pairwise_distances(pts: np.ndarray, diag: float) -> np.ndarray:
    """Diagonal-normalized Euclidean distances for each pair (i, j), i < j.

    Pairs are emitted in lexicographic order over positions in `pts`.
    Generalized to any n >= 2 points; production uses n = 19.
    """
    if not math.isfinite(diag) or diag <= 0.0:
        raise DegenerateDiagonal(f"frame diagonal must be positive, got {diag}")
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError(f"expected (n >= 2, 2) points, got shape {pts.shape}")
    i, j = np.triu_indices(pts.shape[0], k=1)
    deltas = pts[i] - pts[j]
    return np.hypot(deltas[:, 0], deltas[:, 1]) / diag


def featurize(
    frame: LandmarkFrame,
    mode: FeatureMode = FeatureMode.DIST171,
    sel: KeypointSelection = DEFAULT_SELECTION,
) -> FeatureVector:
    """Convert a validated frame into a feature vector for the given mode."""
    if mode is FeatureMode.RAW478:
        values = frame.points.ravel()
    elif mode is FeatureMode.RAW19:
        values = frame.points[list(sel.indices)].ravel()
    else:
        values = pairwise_distances(select_keypoints(frame, sel), frame.diagonal)
    return FeatureVector(mode=mode, values=values)


def frame_to_record(frame: LandmarkFrame, label: Label | str | None = None) -> dict[str, Any]:
    """Encode a frame as the shared newline-delimited JSON record."""
    rec: dict[str, Any] = {
        "id": frame.frame_id,
        "ts_ms": frame.ts_ms,
        "width": frame.width,
        "height": frame.height,
        "landmarks": frame.points.tolist(),
    }
    if label is not None:
        rec["label"] = str(Label(label).value)
    return rec
