"""Image and batch extraction into the shared landmark frame record format.

Records are newline-delimited JSON objects with fields id, ts_ms, width,
height, landmarks (478 [x, y] pairs normalized to [0, 1]) and an optional
label. When no face is found the record carries the all-zero sentinel.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import cv2
import numpy as np

from .engine import MESH_POINTS

CROP_WIDTH = 640
CROP_HEIGHT = 480

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


class UndecodableImage(RuntimeError):
    pass


class ImageTooSmall(RuntimeError):
    """Center-crop never upscales; undersized inputs are an error."""


class EmptyInput(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractionConfig:
    center_crop: bool = False
    label: str | None = None  # stamped onto every record (for dataset creation)
    fps_cap: float = 27.0


def center_crop(image: np.ndarray, width: int = CROP_WIDTH, height: int = CROP_HEIGHT) -> np.ndarray:
    h, w = image.shape[:2]
    if w < width or h < height:
        raise ImageTooSmall(f"input {w}x{h} is smaller than the {width}x{height} crop")
    x0 = (w - width) // 2
    y0 = (h - height) // 2
    return image[y0:y0 + height, x0:x0 + width]


def sentinel_points() -> list[list[float]]:
    return [[0.0, 0.0]] * MESH_POINTS


def is_sentinel(record: dict[str, Any]) -> bool:
    return all(x == 0.0 and y == 0.0 for x, y in record["landmarks"])


def extract_image(image: np.ndarray, cfg: ExtractionConfig, engine, frame_id: str = "",
                  ts_ms: int | None = None) -> dict[str, Any]:
    """One image to one frame record; all-zero sentinel when no face."""
    if image is None or image.size == 0:
        raise UndecodableImage("empty image")
    if cfg.center_crop:
        image = center_crop(image)
    h, w = image.shape[:2]
    points = engine.detect(image)
    record: dict[str, Any] = {
        "id": frame_id,
        "ts_ms": int(time.time_ns() // 1_000_000) if ts_ms is None else int(ts_ms),
        "width": int(w),
        "height": int(h),
        "landmarks": sentinel_points() if points is None else np.asarray(points, dtype=np.float64).tolist(),
    }
    if cfg.label is not None:
        record["label"] = cfg.label
    return record


def iter_image_paths(input_path: str | Path) -> list[Path]:
    """Deterministic (sorted) image list for a file or directory input."""
    path = Path(input_path)
    if path.is_file():
        return [path]
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    raise EmptyInput(f"no such input {path}")


def extract_batch(input_path: str | Path, out_path: str | Path, cfg: ExtractionConfig,
                  engine) -> dict[str, Any]:
    """Extract every image under input_path into a records file.

    Per-file failures are collected and the run continues; an empty input set
    is an error. Returns a summary: processed, no_face, errors.
    """
    paths = iter_image_paths(input_path)
    if not paths:
        raise EmptyInput(f"no images under {input_path}")

    processed = 0
    no_face = 0
    errors: list[dict[str, str]] = []
    with open(out_path, "w", encoding="utf-8") as fh:
        for i, path in enumerate(paths):
            image = cv2.imread(str(path), cv2.IMREAD_COLOR)
            try:
                if image is None:
                    raise UndecodableImage(f"cannot decode {path.name}")
                record = extract_image(image, cfg, engine, frame_id=path.stem, ts_ms=i)
            except (UndecodableImage, ImageTooSmall) as exc:
                errors.append({"file": str(path), "error": str(exc)})
                continue
            if is_sentinel(record):
                no_face += 1
            fh.write(json.dumps(record) + "\n")
            processed += 1
    return {"processed": processed, "no_face": no_face, "errors": errors, "out": str(out_path)}
