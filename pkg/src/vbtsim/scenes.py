"""Procedural background scenes: fabrics seen through clear skin, test charts."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .optics import BackgroundScene

FABRICS = ("cotton", "fibre", "hemp")


def fabric(texture_id: str, shape: tuple[int, int], seed: int = 0,
           distance_factor: float = 0.8) -> BackgroundScene:
    """Synthetic fabric texture.

    cotton: blue with horizontal grain; fibre: grey with glossy point
    texture; hemp: beige with rough, unstructured grain.
    """
    rng = np.random.default_rng(seed)
    rows, cols = shape
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    if texture_id == "cotton":
        base = np.array([0.16, 0.26, 0.58])
        phase = rng.uniform(0, 2 * np.pi)
        tex = 0.09 * np.sin(2 * np.pi * yy / 4.0 + phase)
        tex += 0.02 * rng.standard_normal(shape)
        img = base + tex[:, :, None] * np.array([0.6, 0.8, 1.0])
    elif texture_id == "fibre":
        base = np.array([0.42, 0.42, 0.46])
        ox, oy = rng.uniform(0, 6, size=2)
        dx = (xx - ox) % 6.0 - 3.0
        dy = (yy - oy) % 6.0 - 3.0
        spots = 0.25 * np.exp(-(dx * dx + dy * dy) / 1.2)
        img = base + spots[:, :, None] + 0.015 * rng.standard_normal(shape + (1,))
    elif texture_id == "hemp":
        base = np.array([0.56, 0.46, 0.30])
        noise = ndimage.gaussian_filter(rng.standard_normal(shape), 1.5)
        noise /= noise.std() + 1e-12
        img = base + 0.07 * noise[:, :, None]
    else:
        raise ValueError(f"unknown fabric {texture_id!r}; choose from {FABRICS}")
    return BackgroundScene(np.clip(img, 0.0, 1.0), distance_factor)


def checkerboard(shape: tuple[int, int], square_px: int = 8, lo: float = 0.1,
                 hi: float = 0.9) -> np.ndarray:
    rows, cols = shape
    yy, xx = np.mgrid[0:rows, 0:cols]
    cb = ((yy // square_px + xx // square_px) % 2).astype(np.float64)
    g = lo + (hi - lo) * cb
    return np.repeat(g[:, :, None], 3, axis=2)
