"""Image preprocessing and training-time augmentation.

Preprocessing resizes any word image to the model input size with bilinear
resampling (aspect ratio deliberately not preserved), converts to grayscale
and scales 8-bit values by v/127.5 - 1 into [-1, 1]. Augmentation operates on
float images in [0, 1] and applies, each with its own probability: an affine
warp (small rotation, shear, scale), an elastic displacement field, a
brightness offset and a contrast rescale. Every augmentation draw is fully
determined by the provided seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import DataError, InvalidInputError


@dataclass(frozen=True)
class AugmentSettings:
    p_affine: float = 0.5
    rotate_deg: float = 5.0
    shear: float = 0.3
    scale: tuple[float, float] = (0.9, 1.1)
    p_elastic: float = 0.5
    elastic_alpha: float = 34.0
    elastic_sigma: float = 4.0
    p_brightness: float = 0.5
    brightness: float = 0.2
    p_contrast: float = 0.5
    contrast: tuple[float, float] = (0.8, 1.2)

    @staticmethod
    def disabled() -> "AugmentSettings":
        return AugmentSettings(p_affine=0.0, p_elastic=0.0, p_brightness=0.0, p_contrast=0.0)


def load_image(path: str) -> np.ndarray:
    """Decode an image file to a grayscale float array in [0, 1]."""
    try:
        with Image.open(path) as img:
            gray = img.convert("L")
            return np.asarray(gray, dtype=np.float64) / 255.0
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from None


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a float [0,1] image to height x width, ratio ignored."""
    if image.ndim != 2 or image.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D image, got shape {image.shape}")
    if image.shape == (height, width):
        return image.astype(np.float64)
    pil = Image.fromarray(image.astype(np.float32), mode="F")
    resized = pil.resize((width, height), resample=Image.BILINEAR)
    return np.asarray(resized, dtype=np.float64)


def normalize(image: np.ndarray) -> np.ndarray:
    """Float [0,1] -> [-1, 1] (the 8-bit version of this map is v/127.5 - 1)."""
    return (image * 2.0 - 1.0).astype(np.float32)


def preprocess(image, size: tuple[int, int] = (64, 256)) -> np.ndarray:
    """Full inference-time pipeline: decode/convert, resize, normalize.

    Accepts a file path, a uint8 array or a float [0,1] array; returns a
    float32 (H, W) array in [-1, 1].
    """
    if isinstance(image, (str, bytes)):
        arr = load_image(image)
    else:
        arr = np.asarray(image)
        if arr.dtype == np.uint8:
            arr = arr.astype(np.float64) / 255.0
        else:
            arr = arr.astype(np.float64)
    return normalize(resize_bilinear(arr, size[0], size[1]))


def _affine(image: np.ndarray, rng: np.random.Generator, settings: AugmentSettings) -> np.ndarray:
    angle = np.deg2rad(rng.uniform(-settings.rotate_deg, settings.rotate_deg))
    shear = rng.uniform(-settings.shear, settings.shear)
    scale = rng.uniform(settings.scale[0], settings.scale[1])
    cos, sin = np.cos(angle), np.sin(angle)
    # forward = scale . rotation . shear-in-x; warp with its inverse about the center
    forward = np.array([[cos, -sin], [sin, cos]]) @ np.array([[1.0, shear], [0.0, 1.0]]) * scale
    inverse = np.linalg.inv(forward)
    center = (np.asarray(image.shape) - 1) / 2.0
    offset = center - inverse @ center
    return ndimage.affine_transform(image, inverse, offset=offset, order=1, mode="nearest")


def _elastic(image: np.ndarray, rng: np.random.Generator, settings: AugmentSettings) -> np.ndarray:
    shape = image.shape
    dy = ndimage.gaussian_filter(rng.uniform(-1, 1, shape), settings.elastic_sigma) * settings.elastic_alpha
    dx = ndimage.gaussian_filter(rng.uniform(-1, 1, shape), settings.elastic_sigma) * settings.elastic_alpha
    ys, xs = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    return ndimage.map_coordinates(image, [ys + dy, xs + dx], order=1, mode="nearest")


def augment(image: np.ndarray, settings: AugmentSettings, rng_seed) -> np.ndarray:
    """Apply the configured augmentations to a float [0,1] image, seeded."""
    if image.ndim != 2:
        raise InvalidInputError(f"expected a 2-D image, got shape {image.shape}")
    rng = np.random.default_rng(rng_seed)
    out = image.astype(np.float64)
    if rng.uniform() < settings.p_affine:
        out = _affine(out, rng, settings)
    if rng.uniform() < settings.p_elastic:
        out = _elastic(out, rng, settings)
    if rng.uniform() < settings.p_brightness:
        out = out + rng.uniform(-settings.brightness, settings.brightness)
    if rng.uniform() < settings.p_contrast:
        factor = rng.uniform(settings.contrast[0], settings.contrast[1])
        mean = out.mean()
        out = (out - mean) * factor + mean
    return np.clip(out, 0.0, 1.0)
