from __future__ import annotations

import os

import numpy as np
from PIL import Image

from config import get_logger
from utils.errors import InputError, InvalidParameterError

logger = get_logger("image_io")

IMAGE_FORMATS = {".png": "PNG", ".pgm": "PPM"}


def _to_bytes(values: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def _save(array: np.ndarray, path: str, scale: int = 1) -> None:
    suffix = os.path.splitext(path)[1].lower()
    if suffix not in IMAGE_FORMATS:
        raise InvalidParameterError(f"Unsupported image format '{suffix}' for {path} (use .png or .pgm)")
    if int(scale) != scale or scale < 1:
        raise InvalidParameterError(f"--scale must be an integer >= 1, got {scale}")
    if scale > 1:
        array = np.kron(array, np.ones((scale, scale), dtype=np.uint8))

    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        # Pillow writes binary P5 PGM for mode L through the PPM plugin
        Image.fromarray(array, mode="L").save(path, format=IMAGE_FORMATS[suffix])
    except OSError as e:
        logger.error(f"IMAGE_ERROR: Failed to write {path}: {e}")
        raise InputError(f"Cannot write image {path}: {e}") from e


def save_gray_image(image, path: str, scale: int = 1) -> None:
    """Write a GrayImage as an 8-bit PNG or PGM"""
    _save(_to_bytes(image.pixels), path, scale)
    logger.debug(f"IMAGE: Saved {image.width}x{image.height} image to {path}")


def save_mask(mask, path: str) -> None:
    """Write a Mask as {0, 255}"""
    _save(np.where(mask.bits, 255, 0).astype(np.uint8), path)


def save_heatmap(image, path: str, scale: int = 1) -> None:
    """Write an n_pol x n_az heatmap, optionally upscaled with nearest neighbour"""
    _save(_to_bytes(image.pixels), path, scale)
    logger.info(f"IMAGE: Saved heatmap {image.height}x{image.width} (x{scale}) to {path}")


def load_gray(path: str) -> np.ndarray:
    """Read an 8-bit image back as floats in [0, 1]"""
    if not os.path.isfile(path):
        raise InputError(f"Image not found: {path}")
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
