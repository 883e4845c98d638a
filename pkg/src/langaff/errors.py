"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


# -- dataset ---------------------------------------------------------------

class AllZeroMap(ToolkitError):
    """Affordance normalization received a map with no positive entries."""


class OutOfBounds(ToolkitError):
    """Pixel coordinate outside the raster."""


class ManifestParseError(ToolkitError):
    """Manifest file is syntactically or structurally invalid."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingAsset(ToolkitError):
    """Manifest references a raster file that does not exist."""


# -- encoders / model ------------------------------------------------------

class EmptyPrompt(ToolkitError):
    """Text encoder received an empty or whitespace-only prompt."""


class DimensionMismatch(ToolkitError):
    """Array shapes are incompatible for the requested operation."""


class EmptyDataset(ToolkitError):
    """Training requires at least one sample."""


class NonFiniteLoss(ToolkitError):
    """Training loss became NaN or infinite."""

    def __init__(self, epoch: int, value: float):
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}")
        self.epoch = epoch


class CheckpointError(ToolkitError):
    """Checkpoint file is missing, corrupt, or from an unknown version."""


# -- augmentation ----------------------------------------------------------

class MaskClipped(ToolkitError):
    """Rotation pushed more than the allowed fraction of the mask out of frame."""


class ClientFailure(ToolkitError):
    """An external-model client failed after its retry budget."""

    def __init__(self, message: str, retries: int = 0):
        super().__init__(message)
        self.retries = retries


class MaskViolation(ToolkitError):
    """An inpainting client modified pixels inside the keep mask."""


# -- actions ---------------------------------------------------------------

class EmptyMask(ToolkitError):
    """Mask has no foreground pixels."""


class DepthMissing(ToolkitError):
    """Operation needs a depth map that was not provided."""


class DegenerateDirection(ToolkitError):
    """Push start and end are closer than 1 mm in the table plane."""


class TargetMismatch(UserWarning):
    """Affordance argmax fell outside the target mask (warning, not an error)."""


# -- planner ---------------------------------------------------------------

class MalformedResponse(ToolkitError):
    """No structured decision record could be extracted from a response."""

    def __init__(self, message: str, excerpt: str = ""):
        if excerpt:
            message = f"{message}: {excerpt[:120]!r}"
        super().__init__(message)
        self.excerpt = excerpt


class InvalidDecision(ToolkitError):
    """A decision record was found but violates the decision invariants."""

    def __init__(self, message: str, excerpt: str = ""):
        if excerpt:
            message = f"{message}: {excerpt[:120]!r}"
        super().__init__(message)
        self.excerpt = excerpt


class PlanningFailed(ToolkitError):
    """Planner gave up after exhausting its retry budget."""


# -- simulation ------------------------------------------------------------

class LibraryTooSmall(ToolkitError):
    """Scenario generation needs a non-empty held-out object/instruction pool."""


# -- configuration ---------------------------------------------------------

class ConfigError(ToolkitError):
    """Toolkit configuration file is invalid or references missing paths."""
