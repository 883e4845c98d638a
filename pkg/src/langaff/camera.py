"""Pixel/world conversions for the top-down camera convention.

World x grows with image column, world y with image row, z is height above
the table. Back-projection scales by the height of the surface seen at the
pixel, so (cx, cy) always maps to world (0, 0, h).
"""

from __future__ import annotations

import numpy as np

from .data import CameraModel, DepthMap
from .errors import OutOfBounds


def pixel_to_world_at_height(
    pixel: tuple[float, float], height: float, camera: CameraModel
) -> np.ndarray:
    """Back-project a pixel assuming it sees a surface at the given height."""
    row, col = pixel
    x = (col - camera.cx) * height / camera.fx
    y = (row - camera.cy) * height / camera.fy
    return np.array([x, y, height], dtype=np.float64)


def pixel_to_world(
    pixel: tuple[int, int], depth: DepthMap, camera: CameraModel
) -> np.ndarray:
    """Back-project a pixel using the depth map's height at that pixel."""
    row, col = pixel
    h, w = depth.shape
    if not (0 <= row < h and 0 <= col < w):
        raise OutOfBounds(f"pixel ({row}, {col}) outside {h}x{w} raster")
    return pixel_to_world_at_height(pixel, float(depth.depths[row, col]), camera)


def world_to_pixel(point: np.ndarray, camera: CameraModel) -> tuple[float, float]:
    """Project a world point back to (row, col); inverse of pixel_to_world."""
    x, y, z = np.asarray(point, dtype=np.float64)
    if z <= 0:
        raise ValueError(f"cannot project a point at height {z}; need z > 0")
    col = x * camera.fx / z + camera.cx
    row = y * camera.fy / z + camera.cy
    return row, col
