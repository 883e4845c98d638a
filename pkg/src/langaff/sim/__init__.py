"""Deterministic 2D tabletop world: rendering, actions, scenarios, scoring."""

from .scene import (  # noqa: F401
    DIRECTION_VECTORS,
    GRASP,
    PUSH,
    ObjectPart,
    SimObject,
    SimScene,
    Task,
    polygon_grasp_angle,
)
from .shapes import ShapeLibrary, beveled_slab  # noqa: F401
from .render import RenderResult, render  # noqa: F401
from .step import StepOutcome, step_grasp, step_push  # noqa: F401
from .scenarios import (  # noqa: F401
    IMAGE_HW,
    ScenarioConfig,
    WORKSPACE_BOUNDS,
    generate_scenarios,
    make_camera,
)
from .datagen import generate_training_dataset, training_pairs  # noqa: F401
from .evaluate import (  # noqa: F401
    METHOD_BASELINE,
    METHOD_MODEL,
    METHOD_ORACLE,
    ResultsTable,
    evaluate,
)
