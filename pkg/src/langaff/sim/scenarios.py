"""Seeded scene placement and the seen/unseen evaluation suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import CameraModel
from ..errors import LibraryTooSmall
from ..geometry import axis_angle_difference
from .scene import (
    DIRECTION_VECTORS,
    GRASP,
    PUSH,
    SimObject,
    SimScene,
    Task,
    polygon_grasp_angle,
)
from .shapes import ShapeLibrary
from .step import _travel_allowance

# Shared world constants: 128 px at fx/height = 200 px/m spans 0.64 m, so a
# +-0.30 m workspace keeps every object inside the frame with margin.
IMAGE_HW = (128, 128)
WORKSPACE_BOUNDS = (-0.30, -0.30, 0.30, 0.30)
OBJECT_CLEARANCE_M = 0.05
PUSH_ROOM_M = 0.07
GRASP_COMPAT_DEG = 12.0  # margin under the simulator's 15 deg success window


def make_camera(image_hw: tuple[int, int] = IMAGE_HW) -> CameraModel:
    h, w = image_hw
    return CameraModel(fx=10.0, fy=10.0, cx=w / 2.0, cy=h / 2.0, table_height=0.0)


@dataclass(frozen=True)
class ScenarioConfig:
    n_scenes: int = 6
    tasks_per_scene: int = 20
    seed: int = 0
    unseen_fraction: float = 0.5
    objects_per_scene: int = 3


def place_objects(
    prototypes: list[SimObject],
    rng: np.random.Generator,
    bounds: tuple[float, float, float, float] = WORKSPACE_BOUNDS,
    max_tries: int = 200,
) -> list[SimObject]:
    """Drop objects at random poses without overlap, margins included.

    Clearance uses bounding circles, which is conservative but fast and keeps
    a real gap between objects for oracle push approach paths.
    """
    x_min, y_min, x_max, y_max = bounds
    placed: list[SimObject] = []
    for proto in prototypes:
        radius = float(np.linalg.norm(proto.footprint, axis=1).max())
        for _ in range(max_tries):
            x = rng.uniform(x_min + radius + 0.01, x_max - radius - 0.01)
            y = rng.uniform(y_min + radius + 0.01, y_max - radius - 0.01)
            yaw = rng.uniform(0.0, 2.0 * np.pi)
            ok = True
            for other in placed:
                other_r = float(np.linalg.norm(other.footprint, axis=1).max())
                gap = np.hypot(x - other.pose[0], y - other.pose[1]) - radius - other_r
                if gap < OBJECT_CLEARANCE_M:
                    ok = False
                    break
            if ok:
                placed.append(
                    SimObject(
                        instance_id=proto.instance_id,
                        category=proto.category,
                        footprint=proto.footprint,
                        pose=(x, y, yaw),
                        height=proto.height,
                        parts=proto.parts,
                        color_hsv=proto.color_hsv,
                    )
                )
                break
        else:
            raise LibraryTooSmall(
                f"could not place {proto.instance_id} after {max_tries} tries"
            )
    return placed


def compatible_grasp_parts(obj: SimObject) -> list[str]:
    """Parts whose short-edge angle matches the whole-object box angle.

    The pipeline takes its jaw angle from the full object mask, so a part
    whose own box disagrees with it by more than the success window can never
    be grasped correctly; such parts stay out of the task pool.
    """
    object_angle = polygon_grasp_angle(obj.world_footprint())
    names = []
    for part in obj.parts:
        part_angle = polygon_grasp_angle(obj.world_part(part.name))
        if axis_angle_difference(part_angle, object_angle) <= GRASP_COMPAT_DEG:
            names.append(part.name)
    return names


def pushable_directions(obj: SimObject, bounds=WORKSPACE_BOUNDS) -> list[str]:
    """Directions with enough workspace room for a scoring displacement."""
    out = []
    for name, vec in DIRECTION_VECTORS.items():
        room = _travel_allowance(
            obj.world_footprint(), np.array(vec, dtype=np.float64), bounds
        )
        if room >= PUSH_ROOM_M:
            out.append(name)
    return out


def generate_scenarios(
    config: ScenarioConfig,
    library: ShapeLibrary | None = None,
    training_pairs: set[tuple[str, str]] | None = None,
) -> list[Task]:
    """Build the evaluation suite: early scenes seen, late scenes unseen.

    Seen scenes draw training instances and canonical instruction strings;
    unseen scenes draw held-out instances and paraphrase strings. When the
    training (instance id, instruction) pairs are supplied, any collision
    with an unseen task raises LibraryTooSmall.
    """
    library = library or ShapeLibrary()
    seen_ids = library.seen_instance_ids()
    unseen_ids = library.unseen_instance_ids()
    if not unseen_ids:
        raise LibraryTooSmall("held-out instance pool is empty")
    canonical_strings = library.canonical_instruction_strings()

    n_seen_scenes = round(config.n_scenes * (1.0 - config.unseen_fraction))
    camera = make_camera(IMAGE_HW)
    tasks: list[Task] = []

    for scene_index in range(config.n_scenes):
        is_seen = scene_index < n_seen_scenes
        split = "seen" if is_seen else "unseen"
        rng = np.random.default_rng([config.seed, 77, scene_index])
        pool = seen_ids if is_seen else unseen_ids

        # distinct categories per scene so instructions are unambiguous
        by_family: dict[str, list[str]] = {}
        for iid in pool:
            by_family.setdefault(iid.split("#")[0], []).append(iid)
        families = list(by_family)
        if len(families) < config.objects_per_scene:
            raise LibraryTooSmall(
                f"need {config.objects_per_scene} families, have {len(families)}"
            )
        chosen_families = rng.choice(families, size=config.objects_per_scene, replace=False)
        instance_ids = [
            by_family[fam][rng.integers(len(by_family[fam]))] for fam in chosen_families
        ]
        prototypes = [library.build_instance(iid) for iid in instance_ids]
        placed = place_objects(prototypes, rng)
        scene = SimScene(
            objects=tuple(placed),
            bounds=WORKSPACE_BOUNDS,
            camera=camera,
            seed=int(rng.integers(2**31)),
            image_hw=IMAGE_HW,
        )

        grasp_options: list[tuple] = []
        push_options: list[tuple] = []
        for obj in placed:
            pools = library.pools(obj.category)
            grasp_pool = pools.grasp_canonical if is_seen else pools.grasp_paraphrase
            push_pool = pools.push_canonical if is_seen else pools.push_paraphrase
            for part_name in compatible_grasp_parts(obj):
                for instruction in grasp_pool.get(part_name, []):
                    grasp_options.append((GRASP, obj, part_name, None, instruction))
            for direction in pushable_directions(obj):
                for instruction in push_pool[direction]:
                    push_options.append((PUSH, obj, None, direction, instruction))

        if len(grasp_options) + len(push_options) < config.tasks_per_scene:
            raise LibraryTooSmall(
                f"scene {scene_index}: only "
                f"{len(grasp_options) + len(push_options)} task options for "
                f"{config.tasks_per_scene} tasks"
            )
        # an even grasp/push mix; spill over when one pool runs short
        half = config.tasks_per_scene // 2
        n_grasp = min(half, len(grasp_options))
        n_push = min(config.tasks_per_scene - n_grasp, len(push_options))
        n_grasp = config.tasks_per_scene - n_push
        chosen: list[tuple] = []
        for opts, count in ((grasp_options, n_grasp), (push_options, n_push)):
            picks = rng.choice(len(opts), size=count, replace=False)
            chosen += [opts[int(i)] for i in sorted(picks)]
        for t, option in enumerate(chosen):
            kind, obj, part_name, direction, instruction = option
            if not is_seen:
                if instruction in canonical_strings:
                    raise LibraryTooSmall(
                        f"unseen instruction {instruction!r} collides with the canonical pool"
                    )
                if training_pairs and (obj.instance_id, instruction) in training_pairs:
                    raise LibraryTooSmall(
                        f"unseen pair ({obj.instance_id}, {instruction!r}) appears in training"
                    )
            tasks.append(
                Task(
                    task_id=f"scene{scene_index + 1:02d}.task{t + 1:02d}",
                    scene=scene,
                    scene_index=scene_index,
                    instruction=instruction,
                    kind=kind,
                    target_category=obj.category,
                    part_name=part_name,
                    direction=DIRECTION_VECTORS[direction] if direction else None,
                    split=split,
                )
            )
    return tasks
