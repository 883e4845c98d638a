"""Scene-grounded action planning through a pluggable language-model client.

The planner builds a textual scene snapshot, asks a completion client for a
decision, and parses a single-line braced record out of whatever text comes
back. A deterministic keyword-rule stub stands in for the live model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .errors import InvalidDecision, MalformedResponse, PlanningFailed

PROMPT_TEMPLATE_VERSION = "planner_prompt_v1"

MAX_ATTEMPTS = 3  # one initial try plus two corrective retries

_CORRECTIVE_SUFFIX = (
    "\nYour previous reply did not contain a valid decision record. "
    "Reply again with exactly one line like "
    "{action: push, target: cup, end: (30, 5), rationale: ...} "
    "or {action: grasp, target: cup, rationale: ...}."
)

PUSH_VERBS = ("push", "slide", "shove", "nudge", "move")
GRASP_VERBS = ("grasp", "grab", "pick", "lift", "take", "hold", "fetch")

_DIRECTION_WORDS = {
    "left": (0, -1),
    "right": (0, 1),
    "forward": (-1, 0),
    "away": (-1, 0),
    "up": (-1, 0),
    "backward": (1, 0),
    "back": (1, 0),
    "closer": (1, 0),
    "down": (1, 0),
}


@dataclass(frozen=True)
class SceneObject:
    category: str
    bbox: tuple[int, int, int, int]  # (row_min, col_min, row_max, col_max)


@dataclass(frozen=True)
class SceneDescription:
    """Detected objects plus the image geometry they were detected in."""

    objects: tuple[SceneObject, ...]
    image_size: tuple[int, int]  # (H, W)
    image: object = None  # optional pixels for vision-capable clients

    def __post_init__(self):
        h, w = self.image_size
        for obj in self.objects:
            if not obj.category.strip():
                raise ValueError("object category must be non-empty")
            r0, c0, r1, c1 = obj.bbox
            if not (0 <= r0 <= r1 < h and 0 <= c0 <= c1 < w):
                raise ValueError(
                    f"bbox {obj.bbox} outside {h}x{w} image for {obj.category!r}"
                )

    def find(self, category: str) -> SceneObject | None:
        for obj in self.objects:
            if obj.category == category:
                return obj
        return None


@dataclass(frozen=True)
class PlannerDecision:
    """One structured action choice."""

    action_type: str  # "grasp" | "push"
    target_category: str
    push_end_pixel: tuple[int, int] | None = None
    rationale: str = ""

    def __post_init__(self):
        if self.action_type not in ("grasp", "push"):
            raise ValueError(f"unknown action type {self.action_type!r}")
        if (self.push_end_pixel is not None) != (self.action_type == "push"):
            raise ValueError("end pixel is required exactly when the action is push")


def serialize_decision(decision: PlannerDecision) -> str:
    """Canonical single-line record; parse_decision inverts this exactly."""
    parts = [f"action: {decision.action_type}", f"target: {decision.target_category}"]
    if decision.push_end_pixel is not None:
        r, c = decision.push_end_pixel
        parts.append(f"end: ({r}, {c})")
    parts.append(f"rationale: {decision.rationale}")
    return "{" + ", ".join(parts) + "}"


def load_prompt_template() -> str:
    return (
        resources.files("langaff.assets")
        .joinpath(f"{PROMPT_TEMPLATE_VERSION}.txt")
        .read_text(encoding="utf-8")
    )


def build_prompt(scene: SceneDescription, instruction: str) -> str:
    """Fill the versioned template with the scene snapshot and instruction."""
    if not instruction.strip():
        raise ValueError("instruction must be non-empty")
    if scene.objects:
        obj_lines = "\n".join(
            f"- {o.category} @ ({o.bbox[0]},{o.bbox[1]},{o.bbox[2]},{o.bbox[3]})"
            for o in scene.objects
        )
    else:
        obj_lines = "- no objects detected"
    h, w = scene.image_size
    return load_prompt_template().format(
        height=h, width=w, objects=obj_lines, instruction=instruction
    )


_RECORD_RE = re.compile(r"\{[^{}]*\baction\s*:[^{}]*\}")
_END_RE = re.compile(r"^\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)$")


def parse_decision(response: str, scene: SceneDescription | None = None) -> PlannerDecision:
    """Extract the first decision record from free-form response text.

    Raises MalformedResponse when no braced record with an action key exists,
    and InvalidDecision when a record is present but breaks the decision
    rules (unknown action, push without end pixel, target not in the scene).
    """
    match = _RECORD_RE.search(response or "")
    if not match:
        raise MalformedResponse("no decision record found", excerpt=response or "")
    record = match.group(0)
    body = record[1:-1]

    fields: dict[str, str] = {}
    # rationale is free text and always last; split other fields on commas
    rationale = ""
    rat_idx = body.find("rationale:")
    if rat_idx >= 0:
        rationale = body[rat_idx + len("rationale:"):].strip()
        body = body[:rat_idx].rstrip().rstrip(",")
    for chunk in body.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            # tolerate the end tuple's comma split: "end: (30" + " 5)"
            if fields.get("end", "").count("(") > fields.get("end", "").count(")"):
                fields["end"] += ", " + chunk
                continue
            raise InvalidDecision(f"field without key/value form: {chunk!r}", excerpt=record)
        key, value = chunk.split(":", 1)
        fields[key.strip().lower()] = value.strip()

    action = fields.get("action", "").lower()
    if action not in ("grasp", "push"):
        raise InvalidDecision(f"unknown or missing action {action!r}", excerpt=record)
    target = fields.get("target", "")
    if not target:
        raise InvalidDecision("missing target category", excerpt=record)

    end_pixel = None
    if action == "push":
        end_text = fields.get("end", "")
        m = _END_RE.match(end_text)
        if not m:
            raise InvalidDecision(
                f"push decision needs end: (row, col), got {end_text!r}", excerpt=record
            )
        end_pixel = (int(m.group(1)), int(m.group(2)))
    elif "end" in fields:
        raise InvalidDecision("grasp decision must not carry an end pixel", excerpt=record)

    if scene is not None:
        if scene.find(target) is None:
            raise InvalidDecision(
                f"target {target!r} matches no scene object", excerpt=record
            )
        if end_pixel is not None:
            h, w = scene.image_size
            if not (0 <= end_pixel[0] < h and 0 <= end_pixel[1] < w):
                raise InvalidDecision(
                    f"end pixel {end_pixel} outside {h}x{w} image", excerpt=record
                )

    return PlannerDecision(
        action_type=action,
        target_category=target,
        push_end_pixel=end_pixel,
        rationale=rationale,
    )


def plan(scene: SceneDescription, instruction: str, client) -> PlannerDecision:
    """build_prompt -> client.complete -> parse_decision, with retries.

    Bad responses get up to two corrective retries; after three failed
    attempts the planner raises PlanningFailed.
    """
    prompt = build_prompt(scene, instruction)
    last_error: Exception | None = None
    for attempt in range(MAX_ATTEMPTS):
        try:
            response = client.complete(prompt, getattr(scene, "image", None))
            return parse_decision(response, scene)
        except (MalformedResponse, InvalidDecision) as exc:
            last_error = exc
            prompt = prompt + _CORRECTIVE_SUFFIX
    raise PlanningFailed(
        f"no valid decision after {MAX_ATTEMPTS} attempts: {last_error}"
    )


class RuleStubPlanner:
    """Keyword-rule stand-in for a live language model.

    Reads the scene snapshot back out of the prompt, picks the object whose
    category appears in the instruction, then applies verb rules: push verbs
    give a push whose end pixel sits one bbox extent away along the stated
    direction (clamped to the frame); grasp verbs give a grasp.
    """

    _OBJ_LINE = re.compile(r"^- (.+) @ \((\d+),(\d+),(\d+),(\d+)\)$", re.MULTILINE)
    _SIZE_LINE = re.compile(r"image is (\d+)x(\d+) pixels")

    def complete(self, prompt: str, image=None) -> str:
        size = self._SIZE_LINE.search(prompt)
        height, width = (int(size.group(1)), int(size.group(2))) if size else (0, 0)
        objects = [
            (m.group(1), tuple(int(m.group(i)) for i in range(2, 6)))
            for m in self._OBJ_LINE.finditer(prompt)
        ]
        instruction = ""
        for line in prompt.splitlines():
            if line.startswith("Instruction:"):
                instruction = line[len("Instruction:"):].strip().lower()
                break
        if not objects or not instruction:
            return "I cannot read the scene."

        target, bbox = self._match_target(objects, instruction)
        words = re.findall(r"[a-z']+", instruction)
        if any(v in words for v in PUSH_VERBS):
            direction = next(
                (_DIRECTION_WORDS[wd] for wd in words if wd in _DIRECTION_WORDS),
                (0, -1),
            )
            r0, c0, r1, c1 = bbox
            center = ((r0 + r1) // 2, (c0 + c1) // 2)
            extent_r, extent_c = r1 - r0, c1 - c0
            if direction[0] < 0:
                end = (r0 - extent_r, center[1])
            elif direction[0] > 0:
                end = (r1 + extent_r, center[1])
            elif direction[1] < 0:
                end = (center[0], c0 - extent_c)
            else:
                end = (center[0], c1 + extent_c)
            end = (
                min(max(end[0], 0), max(height - 1, 0)),
                min(max(end[1], 0), max(width - 1, 0)),
            )
            return (
                f"Pushing suits this request. {{action: push, target: {target}, "
                f"end: ({end[0]}, {end[1]}), rationale: keyword rule push}}"
            )
        return (
            f"Grasping suits this request. {{action: grasp, target: {target}, "
            f"rationale: keyword rule grasp}}"
        )

    @staticmethod
    def _match_target(objects, instruction: str):
        # longest category whose every word appears in the instruction wins
        best = None
        for category, bbox in objects:
            words = category.lower().split()
            if all(w in instruction for w in words):
                if best is None or len(category) > len(best[0]):
                    best = (category, bbox)
        return best if best is not None else objects[0]


class GarbageClient:
    """Always answers with unparseable text; exercises the retry contract."""

    def __init__(self):
        self.calls = 0

    def complete(self, prompt: str, image=None) -> str:
        self.calls += 1
        return "I cannot help with that."
