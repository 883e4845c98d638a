"""Core text-image-affordance data model and validation.

Every raster is a numpy array in (row, col) order. Affordance ground truth is
kept as a distribution over pixels so the training loss is well defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AllZeroMap

GROUNDTRUTH = "groundtruth"
PREDICTED_LOGITS = "predicted-logits"
PREDICTED_PROBABILITIES = "predicted-probabilities"
AFFORDANCE_KINDS = (GROUNDTRUTH, PREDICTED_LOGITS, PREDICTED_PROBABILITIES)

PROVENANCES = ("human-labeled", "rotated", "inpainted", "paraphrased")
SPLITS = ("seen", "unseen")

MIN_IMAGE_SIDE = 16
# Affordance support may bleed this many pixels past the mask (boundary blur).
MASK_DILATION_PX = 2
DISTRIBUTION_TOL = 1e-6


@dataclass(frozen=True)
class ImageRGB:
    """H x W x 3 image with 8-bit channels."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"image must be HxWx3, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise ValueError(f"image must be uint8, got {p.dtype}")
        object.__setattr__(self, "pixels", p)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]


@dataclass(frozen=True)
class DepthMap:
    """H x W heights above the table plane, meters. Table plane is 0."""

    depths: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depths, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"depth must be HxW, got shape {d.shape}")
        object.__setattr__(self, "depths", d)

    @property
    def shape(self) -> tuple[int, int]:
        return self.depths.shape


@dataclass(frozen=True)
class AffordanceMap:
    """H x W per-pixel affordance values.

    kind is one of "groundtruth", "predicted-logits",
    "predicted-probabilities". Ground truth and predicted probabilities are
    pixel distributions (non-negative, summing to 1); logits are unconstrained.
    """

    values: np.ndarray
    kind: str = GROUNDTRUTH

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"affordance must be HxW, got shape {v.shape}")
        if self.kind not in AFFORDANCE_KINDS:
            raise ValueError(f"unknown affordance kind {self.kind!r}")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def argmax_pixel(self) -> tuple[int, int]:
        """Pixel attaining the maximum; ties break toward low row, then low col."""
        r, c = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(r), int(c)


@dataclass(frozen=True)
class ObjectMask:
    """Binary foreground mask with a category label."""

    bits: np.ndarray
    category: str = ""

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValueError(f"mask must be HxW, got shape {b.shape}")
        object.__setattr__(self, "bits", b.astype(bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def foreground_count(self) -> int:
        return int(self.bits.sum())

    def centroid(self) -> tuple[float, float]:
        """(row, col) centroid of the foreground pixels."""
        rows, cols = np.nonzero(self.bits)
        if rows.size == 0:
            raise ValueError("mask has no foreground pixels")
        return float(rows.mean()), float(cols.mean())


@dataclass(frozen=True)
class CameraModel:
    """Top-down pinhole intrinsics with the table plane at z = 0."""

    fx: float
    fy: float
    cx: float
    cy: float
    table_height: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class InstructionSample:
    """One text-image-affordance triple, the dataset atom."""

    sample_id: str
    instruction: str
    image: ImageRGB
    affordance: AffordanceMap
    mask: ObjectMask
    depth: DepthMap | None = None
    provenance: str = "human-labeled"
    split: str = "seen"

    @property
    def category(self) -> str:
        return self.mask.category

    def with_updates(self, **changes) -> "InstructionSample":
        return replace(self, **changes)


@dataclass
class Dataset:
    """An ordered collection of instruction samples."""

    samples: list[InstructionSample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, idx: int) -> InstructionSample:
        return self.samples[idx]

    def categories(self) -> list[str]:
        """Distinct categories in first-appearance order."""
        seen: dict[str, None] = {}
        for s in self.samples:
            seen.setdefault(s.category, None)
        return list(seen)


def normalize_affordance(raw: np.ndarray) -> AffordanceMap:
    """Scale a non-negative map so it sums to 1, keeping zeros and ordering.

    Raises AllZeroMap when every entry is zero.
    """
    values = np.asarray(raw, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected HxW array, got shape {values.shape}")
    if np.any(values < 0):
        raise ValueError("affordance values must be non-negative")
    total = float(values.sum())
    if total == 0.0:
        raise AllZeroMap("cannot normalize an all-zero affordance map")
    return AffordanceMap(values / total, kind=GROUNDTRUTH)


def dilate_mask(bits: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Binary dilation with a 3x3 square structuring element."""
    out = np.asarray(bits, dtype=bool)
    for _ in range(iterations):
        padded = np.pad(out, 1, mode="constant")
        acc = np.zeros_like(out)
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                acc |= padded[1 + dr : 1 + dr + out.shape[0], 1 + dc : 1 + dc + out.shape[1]]
        out = acc
    return out


def validate_sample(sample: InstructionSample) -> list[str]:
    """Check every sample invariant; returns one violation string per breach.

    Violations are data, not faults: an empty list means the sample is valid.
    Each entry names the offending field and the rule it breaks.
    """
    violations: list[str] = []
    h, w = sample.image.shape

    if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
        violations.append(
            f"image: size {h}x{w} below minimum {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}"
        )

    for name, raster in (
        ("affordance", sample.affordance),
        ("mask", sample.mask),
        ("depth", sample.depth),
    ):
        if raster is not None and raster.shape != (h, w):
            violations.append(
                f"{name}: shape {raster.shape} differs from image {h}x{w}"
            )

    if not sample.instruction.strip():
        violations.append("instruction: non-empty required")

    if sample.provenance not in PROVENANCES:
        violations.append(f"provenance: unknown value {sample.provenance!r}")
    if sample.split not in SPLITS:
        violations.append(f"split: unknown value {sample.split!r}")

    aff = sample.affordance
    if aff.kind != GROUNDTRUTH:
        violations.append(f"affordance: kind must be groundtruth, got {aff.kind!r}")
    if np.any(aff.values < 0):
        violations.append("affordance: negative values")
    elif abs(float(aff.values.sum()) - 1.0) > DISTRIBUTION_TOL:
        violations.append(
            f"affordance: sums to {float(aff.values.sum()):.8f}, expected 1.0"
        )

    if sample.mask.foreground_count() == 0:
        violations.append("mask: at least 1 foreground pixel required")

    if sample.depth is not None and np.any(sample.depth.depths < 0):
        violations.append("depth: negative heights")

    # Affordance support must sit on the object, give or take boundary blur.
    if sample.mask.shape == aff.shape and sample.mask.foreground_count() > 0:
        allowed = dilate_mask(sample.mask.bits, iterations=MASK_DILATION_PX)
        stray = (aff.values > 0) & ~allowed
        if np.any(stray):
            violations.append(
                f"affordance: {int(stray.sum())} support pixels outside the "
                f"{MASK_DILATION_PX}px-dilated mask"
            )

    return violations
