"""Face-mesh engines: mediapipe when installed, a deterministic synthetic
stand-in otherwise.

An engine maps a BGR image to 478 normalized (x, y) points, or None when no
face is found. Only x and y are kept; depth is discarded.
"""

from __future__ import annotations

import math

import cv2
import numpy as np

MESH_POINTS = 478


class EngineUnavailable(RuntimeError):
    pass


class MediapipeEngine:
    """Wraps mediapipe FaceMesh with iris refinement (478 landmarks)."""

    def __init__(self):
        try:
            import mediapipe as mp
        except ImportError as exc:
            raise EngineUnavailable(
                "mediapipe is not installed; pip install landmark-extractor[mediapipe]"
            ) from exc
        self._mesh = mp.solutions.face_mesh.FaceMesh(
            static_image_mode=True, max_num_faces=1, refine_landmarks=True)

    def detect(self, image_bgr: np.ndarray) -> np.ndarray | None:
        results = self._mesh.process(cv2.cvtColor(image_bgr, cv2.COLOR_BGR2RGB))
        if not results.multi_face_landmarks:
            return None
        pts = np.array(
            [(lm.x, lm.y) for lm in results.multi_face_landmarks[0].landmark],
            dtype=np.float64,
        )
        if pts.shape != (MESH_POINTS, 2):
            return None
        return np.clip(pts, 0.0, 1.0)


def _template_mesh() -> np.ndarray:
    """Fixed 478-point layout on the unit disk (Fibonacci spiral)."""
    pts = np.empty((MESH_POINTS, 2))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for i in range(MESH_POINTS):
        r = math.sqrt((i + 0.5) / MESH_POINTS)
        phi = i * golden
        pts[i] = (r * math.cos(phi), r * math.sin(phi))
    return pts


class SyntheticMeshEngine:
    """Deterministic stand-in: treats the dominant bright blob as the face
    and lays the fixed mesh template over it.

    Not a face detector; it exists so the extraction pipeline, record format,
    and wire behavior are fully exercisable without mediapipe.
    """

    def __init__(self, brightness_threshold: int = 96, min_area_frac: float = 0.02):
        self.brightness_threshold = brightness_threshold
        self.min_area_frac = min_area_frac
        self._template = _template_mesh()

    def detect(self, image_bgr: np.ndarray) -> np.ndarray | None:
        gray = cv2.cvtColor(image_bgr, cv2.COLOR_BGR2GRAY)
        h, w = gray.shape
        _, mask = cv2.threshold(gray, self.brightness_threshold, 255, cv2.THRESH_BINARY)
        n_labels, _, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=8)
        if n_labels < 2:
            return None
        areas = stats[1:, cv2.CC_STAT_AREA]
        best = 1 + int(np.argmax(areas))
        if stats[best, cv2.CC_STAT_AREA] < self.min_area_frac * h * w:
            return None

        x0 = stats[best, cv2.CC_STAT_LEFT]
        y0 = stats[best, cv2.CC_STAT_TOP]
        bw = stats[best, cv2.CC_STAT_WIDTH]
        bh = stats[best, cv2.CC_STAT_HEIGHT]
        center = np.array([(x0 + bw / 2.0) / w, (y0 + bh / 2.0) / h])
        radius = np.array([bw / 2.0 / w, bh / 2.0 / h])
        pts = center + self._template * radius
        return np.clip(pts, 0.0, 1.0)


def make_engine(name: str = "auto"):
    """Engine factory: auto prefers mediapipe and falls back to synthetic."""
    if name == "mediapipe":
        return MediapipeEngine()
    if name == "synthetic":
        return SyntheticMeshEngine()
    if name == "auto":
        try:
            return MediapipeEngine()
        except EngineUnavailable:
            return SyntheticMeshEngine()
    raise ValueError(f"unknown engine {name!r} (auto|mediapipe|synthetic)")
