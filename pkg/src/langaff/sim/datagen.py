"""Synthetic training data: rendered scenes with part-level affordance labels."""

from __future__ import annotations

import numpy as np

from ..data import AffordanceMap, Dataset, InstructionSample, normalize_affordance
from ..geometry import scale_polygon_about_centroid
from .render import rasterize_world_polygon, render
from .scenarios import IMAGE_HW, WORKSPACE_BOUNDS, make_camera, place_objects
from .scene import SimScene
from .shapes import ShapeLibrary

PUSH_CORE_SCALE = 0.45  # push affordance concentrates on the body center


def part_affordance(bits: np.ndarray) -> AffordanceMap:
    """Uniform pixel distribution over a region mask."""
    raw = bits.astype(np.float64)
    return normalize_affordance(raw)


def generate_training_dataset(
    library: ShapeLibrary | None = None,
    n_scenes: int = 40,
    seed: int = 0,
    objects_per_scene: int = 3,
    seen_instances_per_family: int = 3,
) -> Dataset:
    """Render seeded multi-object scenes and label one sample per instruction.

    Every object in a scene contributes grasp samples (one canonical
    instruction per part, rotating through the pool across scenes) and one
    push sample whose affordance sits on the object's core. All samples of a
    scene share its rendered image and depth.
    """
    library = library or ShapeLibrary()
    camera = make_camera(IMAGE_HW)
    seen_ids = library.seen_instance_ids(per_family=seen_instances_per_family)
    by_family: dict[str, list[str]] = {}
    for iid in seen_ids:
        by_family.setdefault(iid.split("#")[0], []).append(iid)
    families = list(by_family)

    samples: list[InstructionSample] = []
    for k in range(n_scenes):
        rng = np.random.default_rng([seed, 11, k])
        chosen = rng.choice(families, size=objects_per_scene, replace=False)
        instance_ids = [by_family[fam][rng.integers(len(by_family[fam]))] for fam in chosen]
        prototypes = [library.build_instance(iid) for iid in instance_ids]
        placed = place_objects(prototypes, rng)
        scene = SimScene(
            objects=tuple(placed),
            bounds=WORKSPACE_BOUNDS,
            camera=camera,
            seed=int(rng.integers(2**31)),
            image_hw=IMAGE_HW,
        )
        rendered = render(scene)

        for obj in placed:
            pools = library.pools(obj.category)
            mask = rendered.object_masks[obj.category]
            for part in obj.parts:
                instructions = list(pools.grasp_canonical[part.name])
                instructions += pools.aliases_grasp.get(part.name, [])
                instruction = instructions[k % len(instructions)]
                bits = rendered.part_masks[(obj.category, part.name)]
                if not bits.any():
                    continue
                samples.append(
                    InstructionSample(
                        sample_id=f"{obj.instance_id}~sc{k:03d}~{part.name.replace(' ', '_')}",
                        instruction=instruction,
                        image=rendered.image,
                        affordance=part_affordance(bits),
                        mask=mask,
                        depth=rendered.depth,
                        provenance="human-labeled",
                        split="seen",
                    )
                )

            direction = library.directions[(k + len(samples)) % len(library.directions)]
            push_pool = list(pools.push_canonical[direction])
            push_pool += pools.aliases_push.get(direction, [])
            instruction = push_pool[k % len(push_pool)]
            core = scale_polygon_about_centroid(obj.world_footprint(), PUSH_CORE_SCALE)
            core_bits = rasterize_world_polygon(core, obj.height, scene)
            core_bits &= mask.bits
            if not core_bits.any():
                continue
            samples.append(
                InstructionSample(
                    sample_id=f"{obj.instance_id}~sc{k:03d}~push",
                    instruction=instruction,
                    image=rendered.image,
                    affordance=part_affordance(core_bits),
                    mask=mask,
                    depth=rendered.depth,
                    provenance="human-labeled",
                    split="seen",
                )
            )
    return Dataset(samples)


def training_pairs(dataset: Dataset) -> set[tuple[str, str]]:
    """(instance id, instruction) pairs; ids encode the instance before '~'."""
    return {(s.sample_id.split("~")[0], s.instruction) for s in dataset}
