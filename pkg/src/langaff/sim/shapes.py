"""Procedural object library: parameterized families, instances, instructions.

The library asset defines family silhouettes, part layouts, and instruction
pools. Instances are drawn deterministically from an id: "mug#3" always has
the same dimensions, colors, and flip. Seen instances use low indices; the
held-out pool lives at index 100 and up so the two can never collide.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from ..geometry import (
    clip_convex_to_band,
    scale_polygon_about_centroid,
)
from .scene import ObjectPart, SimObject

LIBRARY_VERSION = "shape_library_v1"
UNSEEN_INDEX_BASE = 100


def _load_asset() -> dict:
    text = (
        resources.files("langaff.assets")
        .joinpath(f"{LIBRARY_VERSION}.yaml")
        .read_text(encoding="utf-8")
    )
    return yaml.safe_load(text)


def beveled_slab(length: float, width: float, bevel: float) -> np.ndarray:
    """Convex octagon: a length x width slab with beveled corners (CCW)."""
    a, b = length / 2.0, width / 2.0
    be = bevel * min(a, b)
    return np.array(
        [
            (a, b - be), (a - be, b), (-a + be, b), (-a, b - be),
            (-a, -b + be), (-a + be, -b), (a - be, -b), (a, -b + be),
        ]
    )


@dataclass(frozen=True)
class InstructionPools:
    """Instruction strings for one instance, split by protocol role."""

    grasp_canonical: dict[str, list[str]]    # part name -> strings
    grasp_paraphrase: dict[str, list[str]]
    push_canonical: dict[str, list[str]]     # direction -> strings
    push_paraphrase: dict[str, list[str]]
    aliases_grasp: dict[str, list[str]]      # extra training-only strings
    aliases_push: dict[str, list[str]]       # direction -> strings


class ShapeLibrary:
    """Deterministic instance factory over the bundled family definitions."""

    def __init__(self):
        spec = _load_asset()
        self.height = float(spec["height_m"])
        self.families: dict[str, dict] = spec["families"]
        self.directions: list[str] = list(spec["directions"])
        self._push_templates = list(spec["push_instructions"])
        self._push_paraphrase_templates = list(spec["push_paraphrases"])
        self._aliases = spec.get("aliases", {})

    def family_names(self) -> list[str]:
        return list(self.families)

    def seen_instance_ids(self, per_family: int = 3) -> list[str]:
        return [f"{fam}#{k}" for fam in self.families for k in range(per_family)]

    def unseen_instance_ids(self, per_family: int = 2) -> list[str]:
        return [
            f"{fam}#{UNSEEN_INDEX_BASE + k}"
            for fam in self.families
            for k in range(per_family)
        ]

    def build_instance(self, instance_id: str) -> SimObject:
        """Construct the SimObject for an instance id at the origin pose."""
        family, index = instance_id.split("#")
        spec = self.families[family]
        rng = np.random.default_rng(_instance_seed(family, int(index)))
        length = rng.uniform(*spec["length"])
        width = rng.uniform(*spec["width"])
        footprint = beveled_slab(length, width, float(spec["bevel"]))
        flip = bool(spec.get("flip_allowed", False)) and rng.random() < 0.5
        if flip:
            footprint = footprint[::-1] * np.array([-1.0, 1.0])

        parts = []
        for part_spec in spec["parts"]:
            if part_spec["kind"] == "band":
                f0, f1 = part_spec["span"]
                if flip:
                    f0, f1 = 1.0 - f1, 1.0 - f0
                x0 = -length / 2.0 + f0 * length
                x1 = -length / 2.0 + f1 * length
                poly = clip_convex_to_band(footprint, x0, x1)
            else:
                poly = scale_polygon_about_centroid(footprint, float(part_spec["scale"]))
            parts.append(
                ObjectPart(name=part_spec["name"], polygon=poly, shade=float(part_spec["shade"]))
            )

        hue = (float(spec["hue"]) + rng.uniform(-0.025, 0.025)) % 1.0
        sat = rng.uniform(0.70, 0.85)
        val = rng.uniform(0.85, 1.0)
        return SimObject(
            instance_id=instance_id,
            category=family,
            footprint=footprint,
            pose=(0.0, 0.0, 0.0),
            height=self.height,
            parts=tuple(parts),
            color_hsv=(hue, sat, val),
        )

    # -- instruction pools --------------------------------------------------

    def pools(self, family: str) -> InstructionPools:
        spec = self.families[family]
        grasp_canon = {
            p["name"]: list(p["grasp_instructions"]) for p in spec["parts"]
        }
        grasp_para = {
            p["name"]: list(p["grasp_paraphrases"]) for p in spec["parts"]
        }
        push_canon = {
            d: [t.format(category=family, direction=d) for t in self._push_templates]
            for d in self.directions
        }
        push_para = {
            d: [t.format(category=family, direction=d) for t in self._push_paraphrase_templates]
            for d in self.directions
        }
        alias_grasp: dict[str, list[str]] = {}
        alias_push: dict[str, list[str]] = {}
        for alias in self._aliases.get(family, []):
            if "part" in alias:
                alias_grasp.setdefault(alias["part"], []).append(alias["instruction"])
            else:
                alias_push.setdefault(alias["push_direction"], []).append(alias["instruction"])
        return InstructionPools(
            grasp_canonical=grasp_canon,
            grasp_paraphrase=grasp_para,
            push_canonical=push_canon,
            push_paraphrase=push_para,
            aliases_grasp=alias_grasp,
            aliases_push=alias_push,
        )

    def canonical_instruction_strings(self) -> set[str]:
        """Everything a canonical (training) pool could ever contain."""
        out: set[str] = set()
        for family in self.families:
            pools = self.pools(family)
            for items in pools.grasp_canonical.values():
                out.update(items)
            for items in pools.push_canonical.values():
                out.update(items)
            for items in pools.aliases_grasp.values():
                out.update(items)
            for items in pools.aliases_push.values():
                out.update(items)
        return out


def _instance_seed(family: str, index: int) -> int:
    import hashlib

    digest = hashlib.blake2b(
        f"{LIBRARY_VERSION}:{family}:{index}".encode(), digest_size=4
    )
    return int.from_bytes(digest.digest(), "big")


def object_rgb(obj: SimObject, shade: float = 1.0) -> tuple[int, int, int]:
    h, s, v = obj.color_hsv
    r, g, b = colorsys.hsv_to_rgb(h, s, min(1.0, v * shade))
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))
