"""Flat-shaded deterministic rasterization of scenes.

Each object is projected with its own scale fx / height, which keeps the
camera's back-projection exact on object pixels. Backgrounds are seeded
low-amplitude noise around a fixed gray so they carry no task information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import DepthMap, ImageRGB, ObjectMask
from ..geometry import rasterize_polygon
from .scene import SimObject, SimScene
from .shapes import object_rgb

BACKGROUND_GRAY = 90
BACKGROUND_NOISE = 10


@dataclass(frozen=True)
class RenderResult:
    image: ImageRGB
    depth: DepthMap
    object_masks: dict[str, ObjectMask]          # category -> mask
    part_masks: dict[tuple[str, str], np.ndarray]  # (category, part) -> bits


def world_polygon_to_pixels(polygon: np.ndarray, height: float, scene: SimScene) -> np.ndarray:
    """World (x, y) vertices to fractional (row, col) via the scene camera."""
    cam = scene.camera
    scale_x = cam.fx / height
    scale_y = cam.fy / height
    cols = polygon[:, 0] * scale_x + cam.cx
    rows = polygon[:, 1] * scale_y + cam.cy
    return np.stack([rows, cols], axis=1)


def rasterize_world_polygon(polygon: np.ndarray, height: float, scene: SimScene) -> np.ndarray:
    h, w = scene.image_hw
    return rasterize_polygon(world_polygon_to_pixels(polygon, height, scene), h, w)


def render(scene: SimScene) -> RenderResult:
    """Rasterize image, depth, and exact polygon masks for every object."""
    h, w = scene.image_hw
    rng = np.random.default_rng(scene.seed)
    noise = rng.integers(
        -BACKGROUND_NOISE, BACKGROUND_NOISE + 1, size=(h, w, 3), dtype=np.int16
    )
    image = np.clip(BACKGROUND_GRAY + noise, 0, 255).astype(np.uint8)
    depth = np.zeros((h, w), dtype=np.float64)
    object_masks: dict[str, ObjectMask] = {}
    part_masks: dict[tuple[str, str], np.ndarray] = {}

    for obj in scene.objects:
        foot_bits = rasterize_world_polygon(obj.world_footprint(), obj.height, scene)
        image[foot_bits] = object_rgb(obj, shade=1.0)
        depth[foot_bits] = obj.height
        object_masks[obj.category] = ObjectMask(foot_bits, category=obj.category)
        for part in obj.parts:
            part_bits = rasterize_world_polygon(
                obj.world_part(part.name), obj.height, scene
            )
            part_bits &= foot_bits
            image[part_bits] = object_rgb(obj, shade=part.shade)
            part_masks[(obj.category, part.name)] = part_bits

    return RenderResult(
        image=ImageRGB(image),
        depth=DepthMap(depth),
        object_masks=object_masks,
        part_masks=part_masks,
    )
