"""Dataset scaling: rotation, background inpainting, instruction paraphrase.

External models (text generation, image editing) sit behind small client
interfaces. The bundled stubs are deterministic and hermetic so the whole
pipeline can run and be tested offline; live adapters can be swapped in via
the toolkit config without touching this module.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .data import (
    AffordanceMap,
    Dataset,
    DepthMap,
    ImageRGB,
    InstructionSample,
    MASK_DILATION_PX,
    ObjectMask,
    dilate_mask,
    normalize_affordance,
    validate_sample,
)
from .errors import AllZeroMap, ClientFailure, MaskClipped, MaskViolation, ToolkitError

MASK_CLIP_LIMIT = 0.20  # fraction of foreground allowed to leave the frame
FAILURE_ABORT_FRACTION = 0.10


# -- client interfaces -------------------------------------------------------

@dataclass(frozen=True)
class EditPromptRequest:
    """Ask a text generator for background-editing prompts."""

    category: str
    scene_hints: str = ""
    count: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class ParaphraseRequest:
    """Ask a text generator to restate an instruction, keeping its meaning."""

    instruction: str
    count: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not self.instruction.strip():
            raise ValueError("instruction must be non-empty")


_EDIT_CORPUS = (
    "a rustic wooden kitchen table under warm morning light",
    "a stainless steel workbench in a bright workshop",
    "a white marble countertop with soft window shadows",
    "a weathered picnic table in an autumn garden",
    "a dark slate cafe table lit by a hanging lamp",
    "a pale blue desk in a tidy studio apartment",
    "a bamboo mat on a sunlit porch floor",
    "a red checkered tablecloth at an outdoor market stall",
    "a concrete laboratory bench with diffuse overhead light",
    "a glossy black dining table in a dim restaurant",
)

_PARAPHRASE_TEMPLATES = (
    "please {0}",
    "could you {0}",
    "{0} for me",
    "i want you to {0}",
    "go ahead and {0}",
    "{0} right now",
    "would you kindly {0}",
    "your task is to {0}",
)


def _stable_seed(*parts) -> int:
    digest = hashlib.blake2b("\x1f".join(str(p) for p in parts).encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


class CannedTextStub:
    """Deterministic text generator drawing from bundled corpora.

    Selection depends only on (client seed, request), so repeated calls with
    the same request return the same list.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def generate(self, request) -> list[str]:
        if isinstance(request, EditPromptRequest):
            return self._edit_prompts(request)
        if isinstance(request, ParaphraseRequest):
            return self._paraphrases(request)
        raise ClientFailure(f"unsupported request type {type(request).__name__}")

    def _edit_prompts(self, request: EditPromptRequest) -> list[str]:
        rng = np.random.default_rng(
            _stable_seed(self.seed, "edit", request.category, request.scene_hints)
        )
        order = rng.permutation(len(_EDIT_CORPUS))
        prompts = []
        for i in range(request.count):
            base = _EDIT_CORPUS[order[i % len(_EDIT_CORPUS)]]
            cycle = i // len(_EDIT_CORPUS)
            if cycle:
                base = f"{base}, variation {cycle + 1}"
            prompts.append(f"{base}, with a {request.category} on it")
        return prompts

    def _paraphrases(self, request: ParaphraseRequest) -> list[str]:
        rng = np.random.default_rng(
            _stable_seed(self.seed, "para", request.instruction)
        )
        order = rng.permutation(len(_PARAPHRASE_TEMPLATES))
        out = []
        for i in range(request.count):
            tpl = _PARAPHRASE_TEMPLATES[order[i % len(_PARAPHRASE_TEMPLATES)]]
            cycle = i // len(_PARAPHRASE_TEMPLATES)
            text = tpl.format(request.instruction.strip())
            if cycle:
                text = f"{text}, take {cycle + 1}"
            out.append(text)
        return out


class ProceduralInpaintStub:
    """Fills everything outside the keep mask with a prompt-seeded texture.

    In-mask pixels are composited back from the input, so they are bit-exact
    by construction; live adapters must re-composite the same way.
    """

    def edit(self, image: np.ndarray, keep_mask: np.ndarray, prompt: str) -> np.ndarray:
        h, w, _ = image.shape
        rng = np.random.default_rng(_stable_seed("inpaint", prompt))
        base = rng.uniform(40, 215, size=3)
        coarse = rng.uniform(-40, 40, size=(max(2, h // 8), max(2, w // 8), 3))
        texture = _upscale_bilinear(coarse, h, w) + base
        texture += rng.uniform(-12, 12, size=(h, w, 3))
        texture = np.clip(np.rint(texture), 0, 255).astype(np.uint8)
        out = texture.copy()
        out[keep_mask] = image[keep_mask]
        return out


def _upscale_bilinear(arr: np.ndarray, h: int, w: int) -> np.ndarray:
    sh, sw = arr.shape[:2]
    rows = np.clip((np.arange(h) + 0.5) * sh / h - 0.5, 0, sh - 1)
    cols = np.clip((np.arange(w) + 0.5) * sw / w - 0.5, 0, sw - 1)
    r0 = np.floor(rows).astype(int); r1 = np.minimum(r0 + 1, sh - 1)
    c0 = np.floor(cols).astype(int); c1 = np.minimum(c0 + 1, sw - 1)
    wr = (rows - r0)[:, None, None]; wc = (cols - c0)[None, :, None]
    top = arr[r0][:, c0] * (1 - wc) + arr[r0][:, c1] * wc
    bot = arr[r1][:, c0] * (1 - wc) + arr[r1][:, c1] * wc
    return top * (1 - wr) + bot * wr


# -- rotation ----------------------------------------------------------------

def _rotation_center(mask_bits: np.ndarray) -> tuple[float, float]:
    rows, cols = np.nonzero(mask_bits)
    return float(rows.mean()), float(cols.mean())


def _sample_bilinear(raster: np.ndarray, rr: np.ndarray, cc: np.ndarray) -> np.ndarray:
    """Bilinear lookup at fractional (row, col) grids; out of frame reads 0."""
    h, w = raster.shape[:2]
    valid = (rr > -1.0) & (rr < h) & (cc > -1.0) & (cc < w)
    r0 = np.floor(rr).astype(int); c0 = np.floor(cc).astype(int)
    fr = rr - r0; fc = cc - c0
    out = np.zeros(rr.shape + raster.shape[2:], dtype=np.float64)
    for dr, dc, weight in (
        (0, 0, (1 - fr) * (1 - fc)),
        (0, 1, (1 - fr) * fc),
        (1, 0, fr * (1 - fc)),
        (1, 1, fr * fc),
    ):
        r = r0 + dr; c = c0 + dc
        ok = valid & (r >= 0) & (r < h) & (c >= 0) & (c < w)
        vals = np.zeros_like(out)
        vals[ok] = raster[r[ok], c[ok]]
        w_full = weight if out.ndim == 2 else weight[..., None]
        out += np.where(ok if out.ndim == 2 else ok[..., None], w_full * vals, 0.0)
    return out


def _sample_nearest(raster: np.ndarray, rr: np.ndarray, cc: np.ndarray) -> np.ndarray:
    h, w = raster.shape
    r = np.rint(rr).astype(int); c = np.rint(cc).astype(int)
    ok = (r >= 0) & (r < h) & (c >= 0) & (c < w)
    out = np.zeros(rr.shape, dtype=raster.dtype)
    out[ok] = raster[r[ok], c[ok]]
    return out


def rotate_sample(sample: InstructionSample, angle_deg: float) -> InstructionSample:
    """Rotate every raster of a sample by the same angle (counterclockwise).

    Multiples of 90 degrees use the exact whole-raster index permutation;
    other angles rotate about the mask centroid with bilinear resampling for
    image, affordance, and depth, and nearest for the mask. Raises
    MaskClipped when more than 20% of the mask foreground leaves the frame.
    """
    angle = float(angle_deg) % 360.0
    if math.isclose(angle, 0.0, abs_tol=1e-12):
        return sample
    if angle % 90.0 == 0.0:
        k = int(angle // 90) % 4
        image = np.rot90(sample.image.pixels, k, axes=(0, 1)).copy()
        mask = np.rot90(sample.mask.bits, k).copy()
        aff = np.rot90(sample.affordance.values, k).copy()
        depth = None
        if sample.depth is not None:
            depth = DepthMap(np.rot90(sample.depth.depths, k).copy())
        return sample.with_updates(
            image=ImageRGB(image),
            affordance=normalize_affordance(aff),
            mask=ObjectMask(mask, category=sample.category),
            depth=depth,
            provenance="rotated",
        )

    h, w = sample.image.shape
    center = _rotation_center(sample.mask.bits)
    theta = math.radians(angle)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    # clipping check on forward-mapped foreground pixel centers
    rows, cols = np.nonzero(sample.mask.bits)
    u, v = rows - center[0], cols - center[1]
    fr = center[0] + cos_t * u - sin_t * v
    fc = center[1] + sin_t * u + cos_t * v
    outside = (fr < -0.5) | (fr > h - 0.5) | (fc < -0.5) | (fc > w - 0.5)
    clipped_fraction = float(outside.mean())
    if clipped_fraction > MASK_CLIP_LIMIT:
        raise MaskClipped(
            f"rotation by {angle_deg:g} deg clips {clipped_fraction:.0%} of the mask"
        )

    # inverse map: each output pixel pulls from the input
    rr_out, cc_out = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    du = rr_out - center[0]
    dv = cc_out - center[1]
    rr_in = center[0] + cos_t * du + sin_t * dv
    cc_in = center[1] - sin_t * du + cos_t * dv

    image = np.clip(np.rint(_sample_bilinear(sample.image.pixels.astype(np.float64), rr_in, cc_in)), 0, 255).astype(np.uint8)
    mask_bits = _sample_nearest(sample.mask.bits, rr_in, cc_in)
    aff = _sample_bilinear(sample.affordance.values, rr_in, cc_in)
    aff = np.maximum(aff, 0.0)
    # interpolation bleeds a sub-pixel halo; keep support on the object
    aff[~dilate_mask(mask_bits, MASK_DILATION_PX)] = 0.0
    if aff.sum() == 0.0:
        raise MaskClipped(
            f"rotation by {angle_deg:g} deg left no affordance mass in frame"
        )
    depth = None
    if sample.depth is not None:
        depth = DepthMap(_sample_bilinear(sample.depth.depths, rr_in, cc_in))
    return sample.with_updates(
        image=ImageRGB(image),
        affordance=normalize_affordance(aff),
        mask=ObjectMask(mask_bits, category=sample.category),
        depth=depth,
        provenance="rotated",
    )


# -- client-backed operations -------------------------------------------------

def generate_edit_prompts(request: EditPromptRequest, client, retries: int = 2) -> list[str]:
    """Fetch background-edit prompts, retrying transient client failures."""
    attempt = 0
    while True:
        try:
            prompts = client.generate(request)
            break
        except ClientFailure:
            attempt += 1
            if attempt > retries:
                raise ClientFailure(
                    f"edit-prompt generation failed after {attempt} attempts",
                    retries=attempt,
                ) from None
    if len(prompts) != request.count or any(not p.strip() for p in prompts):
        raise ClientFailure(
            f"client returned {len(prompts)} prompts for count {request.count}"
        )
    return prompts


def inpaint_background(sample: InstructionSample, prompt: str, client) -> InstructionSample:
    """Replace everything outside the object mask, preserving the object.

    Raises MaskViolation if the client touched any in-mask pixel; that would
    corrupt the training signal, so it is a hard failure.
    """
    if not prompt.strip():
        raise ValueError("prompt must be non-empty")
    edited = np.asarray(client.edit(sample.image.pixels, sample.mask.bits, prompt))
    if edited.shape != sample.image.pixels.shape or edited.dtype != np.uint8:
        raise MaskViolation(
            f"client returned {edited.dtype} array of shape {edited.shape}"
        )
    changed = (edited != sample.image.pixels).any(axis=2) & sample.mask.bits
    if changed.any():
        raise MaskViolation(
            f"{int(changed.sum())} in-mask pixels changed by inpainting"
        )
    return sample.with_updates(image=ImageRGB(edited), provenance="inpainted")


def paraphrase_instruction(
    instruction: str, count: int, client, retries: int = 2
) -> list[str]:
    """Restate an instruction `count` ways; none may equal the original."""
    request = ParaphraseRequest(instruction=instruction, count=count)
    attempt = 0
    while True:
        try:
            texts = client.generate(request)
            break
        except ClientFailure:
            attempt += 1
            if attempt > retries:
                raise ClientFailure(
                    f"paraphrase failed after {attempt} attempts", retries=attempt
                ) from None
    if len(texts) != count:
        raise ClientFailure(f"client returned {len(texts)} paraphrases, wanted {count}")
    bad = [t for t in texts if not t.strip() or t.strip() == instruction.strip()]
    if bad:
        raise ClientFailure(f"client returned unusable paraphrases: {bad[:3]}")
    return texts


# -- combinatorial expansion ---------------------------------------------------

@dataclass(frozen=True)
class AugmentPlan:
    """Per-sample expansion counts; output size is n*(1+r)*(1+i)*(1+p)."""

    rotations: int = 0
    inpaints: int = 0
    paraphrases: int = 0

    def __post_init__(self):
        for name in ("rotations", "inpaints", "paraphrases"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def multiplier(self) -> int:
        return (1 + self.rotations) * (1 + self.inpaints) * (1 + self.paraphrases)


@dataclass
class AugmentReport:
    """What the expansion produced and which generations failed."""

    requested: int = 0
    produced: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)

    def failure_fraction(self) -> float:
        return len(self.failures) / self.requested if self.requested else 0.0

    def to_text(self) -> str:
        lines = [
            f"requested\t{self.requested}",
            f"produced\t{self.produced}",
            f"failed\t{len(self.failures)}",
        ]
        lines += [f"failure\t{sid}\t{msg}" for sid, msg in self.failures]
        return "\n".join(lines) + "\n"


def augment_dataset(
    seed_dataset: Dataset,
    plan: AugmentPlan,
    text_client=None,
    inpaint_client=None,
    seed: int = 0,
    rotation_range_deg: tuple[float, float] = (-45.0, 45.0),
) -> tuple[Dataset, AugmentReport]:
    """Expand a dataset combinatorially: rotate, then inpaint, then paraphrase.

    Deterministic given the seed. Per-sample failures (clipped rotations,
    client errors, invalid outputs) are collected into the report; the run
    aborts only when more than 10% of attempted generations fail.
    """
    text_client = text_client or CannedTextStub(seed=seed)
    inpaint_client = inpaint_client or ProceduralInpaintStub()
    report = AugmentReport(requested=len(seed_dataset) * plan.multiplier())
    out: list[InstructionSample] = []

    for index, sample in enumerate(seed_dataset):
        rng = np.random.default_rng(_stable_seed(seed, "rot", index, sample.sample_id))
        rotated: list[InstructionSample] = [sample]
        angles = rng.uniform(*rotation_range_deg, size=plan.rotations)
        for j, angle in enumerate(angles, start=1):
            rid = f"{sample.sample_id}.rot{j}"
            try:
                rotated.append(
                    rotate_sample(sample, float(angle)).with_updates(sample_id=rid)
                )
            except ToolkitError as exc:
                _record_failure(report, rid, exc, plan)

        inpainted: list[InstructionSample] = []
        for variant in rotated:
            inpainted.append(variant)
            if plan.inpaints == 0:
                continue
            request = EditPromptRequest(
                category=variant.category or "object",
                scene_hints=variant.sample_id,
                count=plan.inpaints,
            )
            try:
                prompts = generate_edit_prompts(request, text_client)
            except ToolkitError as exc:
                for k in range(1, plan.inpaints + 1):
                    _record_failure(report, f"{variant.sample_id}.inp{k}", exc, plan)
                continue
            for k, prompt in enumerate(prompts, start=1):
                iid = f"{variant.sample_id}.inp{k}"
                try:
                    inpainted.append(
                        inpaint_background(variant, prompt, inpaint_client).with_updates(sample_id=iid)
                    )
                except ToolkitError as exc:
                    _record_failure(report, iid, exc, plan)

        for variant in inpainted:
            _append_checked(out, variant, report, plan)
            if plan.paraphrases == 0:
                continue
            try:
                texts = paraphrase_instruction(
                    variant.instruction, plan.paraphrases, text_client
                )
            except ToolkitError as exc:
                for k in range(1, plan.paraphrases + 1):
                    _record_failure(report, f"{variant.sample_id}.par{k}", exc, plan)
                continue
            for k, text in enumerate(texts, start=1):
                _append_checked(
                    out,
                    variant.with_updates(
                        sample_id=f"{variant.sample_id}.par{k}",
                        instruction=text,
                        provenance="paraphrased",
                    ),
                    report,
                    plan,
                )

    report.produced = len(out)
    return Dataset(out), report


def _append_checked(out, sample, report, plan):
    problems = validate_sample(sample)
    if problems:
        _record_failure(report, sample.sample_id, ValueError(problems[0]), plan)
    else:
        out.append(sample)


def _record_failure(report: AugmentReport, sid: str, exc: Exception, plan: AugmentPlan):
    # a failed rotation also forfeits its downstream inpaint/paraphrase slots
    if ".par" in sid or ".inp" in sid:
        slots = 1 if ".par" in sid else (1 + plan.paraphrases)
    else:
        slots = (1 + plan.inpaints) * (1 + plan.paraphrases)
    report.failures.append((sid, f"{type(exc).__name__}: {exc}"))
    for _ in range(slots - 1):
        report.failures.append((sid, "skipped: upstream generation failed"))
    if report.failure_fraction() > FAILURE_ABORT_FRACTION:
        raise ClientFailure(
            f"aborting: {len(report.failures)}/{report.requested} generations failed"
        )
