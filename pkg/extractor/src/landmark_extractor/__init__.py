"""Landmark extractor sidecar: images or webcam in, frame records out."""

from .engine import MediapipeEngine, SyntheticMeshEngine, make_engine
from .extract import ExtractionConfig, center_crop, extract_batch, extract_image, is_sentinel
from .stream import StreamConfig, StreamStats, camera_frames, stream_frames

__all__ = [
    "MediapipeEngine",
    "SyntheticMeshEngine",
    "make_engine",
    "ExtractionConfig",
    "center_crop",
    "extract_batch",
    "extract_image",
    "is_sentinel",
    "StreamConfig",
    "StreamStats",
    "camera_frames",
    "stream_frames",
]
