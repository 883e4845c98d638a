"""Closed-loop evaluation: render, plan, act, step, score.

Three agents run on identical tasks: the trained affordance pipeline, a
bbox-center baseline that operates at the middle of the detected box, and a
ground-truth oracle that bounds what the scenario suite allows.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..actions import (
    GRASP_DESCEND_M,
    GraspAction,
    PUSH_LENGTH_M,
    PushAction,
    grasp_angle,
    make_grasp,
    make_push,
)
from ..camera import pixel_to_world_at_height
from ..errors import ToolkitError
from ..geometry import ray_segment_entry
from ..model import ModelCheckpoint, forward
from ..planner import SceneDescription, SceneObject, plan
from .render import RenderResult, render
from .scene import GRASP, PUSH, Task, polygon_center, polygon_grasp_angle
from .step import step_grasp, step_push

METHOD_MODEL = "affordance-model"
METHOD_BASELINE = "bbox-center"
METHOD_ORACLE = "oracle"

ORACLE_PUSH_BACKOFF_M = 0.02


@dataclass
class TaskRecord:
    task_id: str
    scene_index: int
    split: str
    method: str
    instruction: str
    success: bool
    reason: str


@dataclass
class ResultsTable:
    n_scenes: int
    records: list[TaskRecord] = field(default_factory=list)

    def successes(self, method: str, scene_index: int | None = None) -> tuple[int, int]:
        hits = total = 0
        for r in self.records:
            if r.method != method:
                continue
            if scene_index is not None and r.scene_index != scene_index:
                continue
            total += 1
            hits += int(r.success)
        return hits, total

    def success_rate(self, method: str, scene_indices=None) -> float:
        hits = total = 0
        for r in self.records:
            if r.method != method:
                continue
            if scene_indices is not None and r.scene_index not in scene_indices:
                continue
            total += 1
            hits += int(r.success)
        return hits / total if total else 0.0

    def to_text(self) -> str:
        """Delimiter-separated method x scene table, cells 'p% (k/n)'."""
        methods = []
        for r in self.records:
            if r.method not in methods:
                methods.append(r.method)
        header = ["method"] + [f"scene_{i + 1}" for i in range(self.n_scenes)] + ["overall"]
        lines = ["\t".join(header)]
        for method in methods:
            cells = [method]
            for i in range(self.n_scenes):
                k, n = self.successes(method, i)
                pct = 100.0 * k / n if n else 0.0
                cells.append(f"{pct:.0f}% ({k}/{n})")
            k, n = self.successes(method)
            pct = 100.0 * k / n if n else 0.0
            cells.append(f"{pct:.0f}% ({k}/{n})")
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps(
                {
                    "task_id": r.task_id,
                    "scene": r.scene_index + 1,
                    "split": r.split,
                    "method": r.method,
                    "instruction": r.instruction,
                    "success": r.success,
                    "reason": r.reason,
                },
                sort_keys=True,
            )
            for r in self.records
        ) + ("\n" if self.records else "")


def scene_description(rendered: RenderResult, image_hw: tuple[int, int]) -> SceneDescription:
    """Detected-object stand-in: categories plus mask bounding boxes."""
    objects = []
    for category, mask in rendered.object_masks.items():
        rows, cols = np.nonzero(mask.bits)
        if rows.size == 0:
            continue
        objects.append(
            SceneObject(
                category=category,
                bbox=(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())),
            )
        )
    return SceneDescription(objects=tuple(objects), image_size=image_hw)


def _push_end_world(decision, target_height: float, camera) -> np.ndarray:
    # planner end pixels convert at the target's surface plane; depth at the
    # end pixel itself is usually bare table, which back-projects to the origin
    return pixel_to_world_at_height(decision.push_end_pixel, target_height, camera)


def run_model_task(task: Task, rendered: RenderResult, checkpoint: ModelCheckpoint,
                   planner_client, image_encoder=None, text_encoder=None):
    scene = task.scene
    desc = scene_description(rendered, scene.image_hw)
    decision = plan(desc, task.instruction, planner_client)
    target = scene.find(decision.target_category)
    if target is None:
        return False, f"planner chose unknown target {decision.target_category!r}", None
    mask = rendered.object_masks[decision.target_category]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, probs = forward(rendered.image, task.instruction, checkpoint,
                           image_encoder, text_encoder)
        if decision.action_type == GRASP:
            action = make_grasp(probs, rendered.depth, mask, scene.camera)
            outcome = step_grasp(scene, action, task)
        else:
            end_world = _push_end_world(decision, target.height, scene.camera)
            action = make_push(probs, end_world, rendered.depth, scene.camera)
            outcome, _ = step_push(scene, action, task)
    return outcome.success, outcome.reason, action


def run_baseline_task(task: Task, rendered: RenderResult, planner_client):
    scene = task.scene
    desc = scene_description(rendered, scene.image_hw)
    decision = plan(desc, task.instruction, planner_client)
    target = scene.find(decision.target_category)
    if target is None:
        return False, f"planner chose unknown target {decision.target_category!r}", None
    mask = rendered.object_masks[decision.target_category]
    rows, cols = np.nonzero(mask.bits)
    center_px = (int(round(rows.mean())), int(round(cols.mean())))
    bbox_center = (
        (int(rows.min()) + int(rows.max())) // 2,
        (int(cols.min()) + int(cols.max())) // 2,
    )
    point = pixel_to_world_at_height(bbox_center, target.height, scene.camera)
    surface_h = float(rendered.depth.depths[bbox_center])
    if decision.action_type == GRASP:
        z = max(surface_h - GRASP_DESCEND_M, scene.camera.table_height)
        action = GraspAction(
            position=(float(point[0]), float(point[1]), z),
            angle_deg=grasp_angle(mask),
        )
        outcome = step_grasp(scene, action, task)
    else:
        end_world = _push_end_world(decision, target.height, scene.camera)
        planar = end_world[:2] - point[:2]
        norm = float(np.linalg.norm(planar))
        if norm < 1e-9:
            return False, "degenerate baseline push direction", None
        d = planar / norm
        action = PushAction(
            start=(float(point[0]), float(point[1]), surface_h),
            direction=(float(d[0]), float(d[1]), 0.0),
        )
        outcome, _ = step_push(scene, action, task)
    return outcome.success, outcome.reason, action


def run_oracle_task(task: Task):
    """Ground-truth agent: part centroid and part angle, ideal push approach."""
    scene = task.scene
    target = scene.find(task.target_category)
    if task.kind == GRASP:
        part_world = target.world_part(task.part_name)
        cx, cy = polygon_center(part_world)
        z = max(target.height - GRASP_DESCEND_M, scene.camera.table_height)
        action = GraspAction(
            position=(float(cx), float(cy), z),
            angle_deg=polygon_grasp_angle(part_world),
        )
        return step_grasp(scene, action, task).success, "oracle grasp", action
    direction = np.array(task.direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)
    footprint = target.world_footprint()
    center = polygon_center(footprint)
    far = center - direction * 1.0
    t_entry = ray_segment_entry(far, direction, footprint)
    entry = far + direction * float(t_entry)
    start = entry - direction * ORACLE_PUSH_BACKOFF_M
    action = PushAction(
        start=(float(start[0]), float(start[1]), 0.0),
        direction=(float(direction[0]), float(direction[1]), 0.0),
        length_m=PUSH_LENGTH_M,
    )
    outcome, _ = step_push(scene, action, task)
    return outcome.success, outcome.reason, action


def evaluate(
    checkpoint: ModelCheckpoint | None,
    planner_client,
    tasks: list[Task],
    methods: tuple[str, ...] = (METHOD_MODEL, METHOD_BASELINE, METHOD_ORACLE),
    image_encoder=None,
    text_encoder=None,
) -> ResultsTable:
    """Run every task under every method; pipeline errors count as failures."""
    n_scenes = max((t.scene_index for t in tasks), default=-1) + 1
    table = ResultsTable(n_scenes=n_scenes)
    render_cache: dict[int, RenderResult] = {}

    for task in tasks:
        key = id(task.scene)
        if key not in render_cache:
            render_cache[key] = render(task.scene)
        rendered = render_cache[key]
        for method in methods:
            try:
                if method == METHOD_MODEL:
                    if checkpoint is None:
                        raise ToolkitError("model method requires a checkpoint")
                    success, reason, _ = run_model_task(
                        task, rendered, checkpoint, planner_client,
                        image_encoder, text_encoder,
                    )
                elif method == METHOD_BASELINE:
                    success, reason, _ = run_baseline_task(task, rendered, planner_client)
                elif method == METHOD_ORACLE:
                    success, reason, _ = run_oracle_task(task)
                else:
                    raise ToolkitError(f"unknown method {method!r}")
            except ToolkitError as exc:
                success, reason = False, f"pipeline error: {type(exc).__name__}: {exc}"
            table.records.append(
                TaskRecord(
                    task_id=task.task_id,
                    scene_index=task.scene_index,
                    split=task.split,
                    method=method,
                    instruction=task.instruction,
                    success=success,
                    reason=reason,
                )
            )
    return table
