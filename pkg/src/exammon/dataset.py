"""Labeled landmark datasets: loading, splitting, and synthetic generation.

The synthetic generator stands in for a private training corpus: it renders
a canonical 478-point face mesh under rigid head rotation. Normal samples
stay near-frontal, Abnormal samples exceed the pose threshold angle, and
everything is deterministic per seed so datasets and tests replay exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .errors import (
    BadSpec,
    EmptyDataset,
    EmptyInput,
    InvalidRatio,
    IoFailure,
    LandmarkError,
    MalformedRecord,
)
from .landmarks import (
    DEFAULT_SELECTION,
    MESH_POINTS,
    FeatureMode,
    KeypointSelection,
    Label,
    LandmarkFrame,
    featurize,
    frame_to_record,
    validate_frame,
)

SYNTH_WIDTH = 640
SYNTH_HEIGHT = 480

# Pose-magnitude margins around the threshold angle: Normal rotations stay
# below NORMAL_FRACTION * theta, Abnormal between ABNORMAL_LO * theta and
# min(ABNORMAL_HI * theta, MAX_ROTATION_DEG).
NORMAL_FRACTION = 0.6
ABNORMAL_LO = 1.4
ABNORMAL_HI = 3.0
MAX_ROTATION_DEG = 75.0


@dataclass(frozen=True)
class LabeledSample:
    frame: LandmarkFrame
    label: Label


@dataclass(frozen=True)
class Dataset:
    samples: tuple[LabeledSample, ...]
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[LabeledSample]:
        return iter(self.samples)


@dataclass(frozen=True)
class SynthSpec:
    """Generator spec: sample count, class ratio, pose threshold, jitter, seed."""

    n: int
    abnormal_ratio: float = 0.5
    theta_deg: float = 15.0
    jitter: float = 0.002
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise BadSpec("n must be >= 1")
        if not 0.0 <= self.abnormal_ratio <= 1.0:
            raise BadSpec("abnormal_ratio must lie in [0, 1]")
        if not self.theta_deg > 0.0:
            raise BadSpec("theta_deg must be > 0")
        if self.jitter < 0.0:
            raise BadSpec("jitter must be >= 0")


@dataclass(frozen=True)
class SynthPose:
    """Generating pose of one synthetic sample; magnitude drives the label."""

    label: Label
    yaw_deg: float
    pitch_deg: float

    @property
    def magnitude_deg(self) -> float:
        return math.hypot(self.yaw_deg, self.pitch_deg)


def load_frames(path: str | Path, require_label: bool = False) -> tuple[list[tuple[LandmarkFrame, Label | None]], int]:
    """Load frame records; invalid frames are dropped and counted.

    Syntactically unparseable lines abort with MalformedRecord (line number
    included); frames failing validation (the all-zero sentinel, wrong point
    counts, out-of-range coordinates) are skipped with a count, matching how
    the training corpus was cleaned.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read dataset from {path}: {exc}") from exc

    if not any(ln.strip() for ln in text.splitlines()):
        raise EmptyInput(f"no records in {path}")

    out: list[tuple[LandmarkFrame, Label | None]] = []
    rejected = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise MalformedRecord(f"{path}:{lineno}: record must be a JSON object")
        label: Label | None = None
        if "label" in rec or require_label:
            try:
                label = Label(rec["label"])
            except (KeyError, ValueError) as exc:
                raise MalformedRecord(f"{path}:{lineno}: missing or unknown label") from exc
        try:
            frame = validate_frame(rec)
        except LandmarkError:
            rejected += 1
            continue
        out.append((frame, label))
    return out, rejected


def load_dataset(path: str | Path) -> tuple[Dataset, int]:
    """Load a labeled dataset in the shared record format."""
    pairs, rejected = load_frames(path, require_label=True)
    samples = tuple(LabeledSample(frame=f, label=l) for f, l in pairs)
    return Dataset(samples=samples, provenance=str(path)), rejected


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write the dataset in the shared newline-delimited record format."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for sample in ds.samples:
                fh.write(json.dumps(frame_to_record(sample.frame, sample.label)))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write dataset to {path}: {exc}") from exc


def split(ds: Dataset, ratio: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle-then-cut; train gets floor(ratio * n) samples."""
    if not 0.0 < ratio < 1.0:
        raise InvalidRatio(f"ratio must lie in (0, 1), got {ratio}")
    if len(ds) == 0:
        raise EmptyDataset("cannot split an empty dataset")
    order = np.random.default_rng(seed).permutation(len(ds))
    cut = int(ratio * len(ds))
    train = tuple(ds.samples[i] for i in order[:cut])
    val = tuple(ds.samples[i] for i in order[cut:])
    tag = f"{ds.provenance}#split(ratio={ratio},seed={seed})"
    return Dataset(train, provenance=tag + "/train"), Dataset(val, provenance=tag + "/val")


@lru_cache(maxsize=1)
def canonical_mesh() -> np.ndarray:
    """Head-centered 3-D template: 468 points on a front-facing ellipsoid via
    a Fibonacci lattice plus two 5-point iris clusters; a handful of indices
    are pinned to face-like positions so the default selection is meaningful.

    Coordinates: x lateral, y vertical (down), z toward the camera; every
    point has norm < 1 so any rotation keeps the projection inside frame.
    """
    pts = np.empty((MESH_POINTS, 3))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for i in range(468):
        z = (i + 0.5) / 468.0  # front hemisphere only
        r = math.sqrt(1.0 - z * z)
        phi = i * golden
        pts[i] = (r * math.cos(phi) * 0.75, r * math.sin(phi) * 0.95, z * 0.6)

    pinned = {
        1: (0.00, 0.05, 0.80),    # nose tip
        4: (0.00, -0.02, 0.78),   # nose bridge
        10: (0.00, -0.85, 0.35),  # forehead
        13: (0.00, 0.38, 0.62),   # upper lip
        14: (0.00, 0.46, 0.60),   # lower lip
        33: (-0.42, -0.28, 0.45),  # eye corners
        133: (-0.16, -0.27, 0.50),
        362: (0.16, -0.27, 0.50),
        263: (0.42, -0.28, 0.45),
        61: (-0.25, 0.42, 0.55),  # mouth corners
        291: (0.25, 0.42, 0.55),
        70: (-0.45, -0.42, 0.42),  # brows
        300: (0.45, -0.42, 0.42),
        152: (0.00, 0.90, 0.40),  # chin
        199: (0.00, 0.80, 0.45),
        168: (0.00, -0.20, 0.62),  # nose root
        234: (-0.70, 0.10, 0.10),  # jaw extremes
        454: (0.70, 0.10, 0.10),
    }
    for idx, xyz in pinned.items():
        pts[idx] = xyz

    for base, cx in ((468, -0.29), (473, 0.29)):  # iris clusters: center + 4 ring points
        pts[base] = (cx, -0.275, 0.50)
        for k, (dx, dy) in enumerate(((0.05, 0.0), (0.0, 0.05), (-0.05, 0.0), (0.0, -0.05)), start=1):
            pts[base + k] = (cx + dx, -0.275 + dy, 0.49)

    pts.flags.writeable = False
    return pts


def project_pose(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """Rotate the canonical mesh and orthographically project to normalized
    [0, 1]^2 image coordinates (no jitter)."""
    yaw = math.radians(yaw_deg)
    pitch = math.radians(pitch_deg)
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    rot_y = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rot_x = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    rotated = canonical_mesh() @ (rot_x @ rot_y).T
    return 0.5 + 0.35 * rotated[:, :2]


def sample_pose(label: Label, theta_deg: float, rng: np.random.Generator) -> SynthPose:
    """Draw one pose whose rotation magnitude matches the label's side of theta."""
    if label is Label.ABNORMAL:
        lo = ABNORMAL_LO * theta_deg
        hi = min(ABNORMAL_HI * theta_deg, MAX_ROTATION_DEG)
        magnitude = rng.uniform(lo, max(hi, lo + 1e-9))
    else:
        magnitude = rng.uniform(0.0, NORMAL_FRACTION * theta_deg)
    direction = rng.uniform(0.0, 2.0 * math.pi)
    return SynthPose(
        label=label,
        yaw_deg=magnitude * math.cos(direction),
        pitch_deg=magnitude * math.sin(direction),
    )


def generate_poses(spec: SynthSpec) -> list[SynthPose]:
    """Deterministic label/pose draw for a spec; replayable from the seed alone."""
    n_abnormal = int(round(spec.n * spec.abnormal_ratio))
    labels = [Label.ABNORMAL] * n_abnormal + [Label.NORMAL] * (spec.n - n_abnormal)
    rng = np.random.default_rng(spec.seed)
    rng.shuffle(labels)
    return [sample_pose(label, spec.theta_deg, rng) for label in labels]


def frame_from_pose(
    pose: SynthPose,
    frame_id: str,
    ts_ms: int,
    jitter: float,
    rng: np.random.Generator,
) -> LandmarkFrame:
    """Render one pose to a valid landmark frame with seeded jitter."""
    uv = project_pose(pose.yaw_deg, pose.pitch_deg)
    if jitter > 0.0:
        uv = uv + rng.normal(0.0, jitter, size=uv.shape)
    uv = np.clip(uv, 0.0, 1.0)
    uv.flags.writeable = False
    return LandmarkFrame(
        frame_id=frame_id,
        ts_ms=ts_ms,
        width=SYNTH_WIDTH,
        height=SYNTH_HEIGHT,
        points=uv,
    )


def synthesize(spec: SynthSpec) -> Dataset:
    """Generate a labeled synthetic dataset; bitwise-identical per seed."""
    poses = generate_poses(spec)
    jitter_rng = np.random.default_rng([spec.seed, 1])
    samples = []
    for i, pose in enumerate(poses):
        frame = frame_from_pose(pose, frame_id=f"synth-{spec.seed}-{i}", ts_ms=i, jitter=spec.jitter, rng=jitter_rng)
        samples.append(LabeledSample(frame=frame, label=pose.label))
    tag = (f"synthesize(n={spec.n},abnormal_ratio={spec.abnormal_ratio},"
           f"theta_deg={spec.theta_deg},jitter={spec.jitter},seed={spec.seed})")
    return Dataset(samples=tuple(samples), provenance=tag)


def featurize_dataset(
    ds: Dataset,
    mode: FeatureMode = FeatureMode.DIST171,
    sel: KeypointSelection = DEFAULT_SELECTION,
) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix (n, dims) and integer label vector for training/eval."""
    if len(ds) == 0:
        raise EmptyDataset("cannot featurize an empty dataset")
    x = np.empty((len(ds), mode.dims))
    y = np.empty(len(ds), dtype=np.intp)
    for i, sample in enumerate(ds.samples):
        x[i] = featurize(sample.frame, mode, sel).values
        y[i] = sample.label.index
    return x, y


def synth_spec_from_config(config: dict[str, Any]) -> SynthSpec:
    """Build a SynthSpec from the documented config keys
    (n, abnormal_ratio, theta_deg, jitter, seed)."""
    known = {"n", "abnormal_ratio", "theta_deg", "jitter", "seed"}
    unknown = set(config) - known
    if unknown:
        raise BadSpec(f"unknown generator keys: {sorted(unknown)}")
    if "n" not in config:
        raise BadSpec("generator config requires n")
    return SynthSpec(
        n=int(config["n"]),
        abnormal_ratio=float(config.get("abnormal_ratio", 0.5)),
        theta_deg=float(config.get("theta_deg", 15.0)),
        jitter=float(config.get("jitter", 0.002)),
        seed=int(config.get("seed", 0)),
    )
