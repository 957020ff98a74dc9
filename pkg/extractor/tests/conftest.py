import cv2
import numpy as np
import pytest


def face_image(width=800, height=600, seed=0):
    """Dark scene with a bright face-sized ellipse: the synthetic engine's
    idea of a face."""
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 40, size=(height, width, 3), dtype=np.uint8)
    center = (width // 2, height // 2)
    axes = (width // 6, height // 4)
    cv2.ellipse(img, center, axes, 0, 0, 360, (200, 210, 220), thickness=-1)
    return img


def blank_image(width=800, height=600):
    return np.full((height, width, 3), 20, dtype=np.uint8)


@pytest.fixture
def face_img():
    return face_image()


@pytest.fixture
def blank_img():
    return blank_image()
