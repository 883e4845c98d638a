"""Dataset manifests: JSON-lines records plus lossless PNG raster assets.

One record per line keeps the manifest diffable and streamable. Raster assets
live next to the manifest under relative paths: images as 8-bit RGB PNG,
masks as 8-bit grayscale PNG (0/255), affordance and depth as 16-bit
grayscale PNG with a stored peak-value scale factor in the record.

Ground-truth affordance reloads as v / sum(v) over the stored 16-bit codes,
which keeps it an exact pixel distribution and makes save-load idempotent:
any map already expressible on the 16-bit grid round-trips bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .data import (
    AffordanceMap,
    Dataset,
    DepthMap,
    ImageRGB,
    InstructionSample,
    ObjectMask,
    normalize_affordance,
)
from .errors import ManifestParseError, MissingAsset

MANIFEST_NAME = "manifest.jsonl"
_RECORD_KEYS = {
    "id", "instruction", "image_path", "affordance_path", "mask_path",
    "depth_path", "category", "provenance", "split", "affordance_scale",
    "depth_scale",
}
_REQUIRED_KEYS = (
    "id", "instruction", "image_path", "affordance_path", "mask_path",
    "category", "provenance", "split", "affordance_scale",
)


def _write_png16(path: Path, values: np.ndarray, scale: float) -> None:
    if scale <= 0:
        codes = np.zeros(values.shape, dtype=np.uint16)
    else:
        codes = np.rint(values * (65535.0 / scale)).astype(np.uint16)
    Image.fromarray(codes, mode="I;16").save(path)


def _read_png16(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.uint16)


def save_manifest(dataset: Dataset, out_dir: str | Path) -> Path:
    """Write the manifest and all raster assets under out_dir.

    Assets are named by sample id; records reference them relatively, so the
    directory can be moved wholesale. Returns the manifest path.
    """
    out_dir = Path(out_dir)
    assets = out_dir / "assets"
    assets.mkdir(parents=True, exist_ok=True)
    lines = []
    image_cache: dict[int, str] = {}
    for sample in dataset:
        sid = sample.sample_id
        # identical image objects can be shared by many samples
        img_key = id(sample.image.pixels)
        if img_key not in image_cache:
            image_cache[img_key] = f"assets/{sid}.image.png"
            Image.fromarray(sample.image.pixels, mode="RGB").save(out_dir / image_cache[img_key])
        image_path = image_cache[img_key]

        aff_path = f"assets/{sid}.affordance.png"
        aff_scale = float(sample.affordance.values.max())
        _write_png16(out_dir / aff_path, sample.affordance.values, aff_scale)

        mask_path = f"assets/{sid}.mask.png"
        Image.fromarray(
            np.where(sample.mask.bits, 255, 0).astype(np.uint8), mode="L"
        ).save(out_dir / mask_path)

        record = {
            "id": sid,
            "instruction": sample.instruction,
            "image_path": image_path,
            "affordance_path": aff_path,
            "affordance_scale": aff_scale,
            "mask_path": mask_path,
            "category": sample.category,
            "provenance": sample.provenance,
            "split": sample.split,
        }
        if sample.depth is not None:
            depth_path = f"assets/{sid}.depth.png"
            depth_scale = float(sample.depth.depths.max())
            _write_png16(out_dir / depth_path, sample.depth.depths, depth_scale)
            record["depth_path"] = depth_path
            record["depth_scale"] = depth_scale
        lines.append(json.dumps(record, sort_keys=True))

    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return manifest_path


def load_manifest(path: str | Path) -> Dataset:
    """Load a manifest written by save_manifest.

    Raises ManifestParseError with the offending line number on bad records
    and MissingAsset naming the first absent raster file.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise ManifestParseError(f"manifest not found: {path}")
    root = path.parent
    samples: list[InstructionSample] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestParseError(f"invalid JSON ({exc.msg})", line=lineno) from exc
        if not isinstance(record, dict):
            raise ManifestParseError("record must be a JSON object", line=lineno)
        unknown = set(record) - _RECORD_KEYS
        if unknown:
            raise ManifestParseError(
                f"unknown record keys {sorted(unknown)}", line=lineno
            )
        missing = [k for k in _REQUIRED_KEYS if k not in record]
        if missing:
            raise ManifestParseError(
                f"record missing keys {missing}", line=lineno
            )
        samples.append(_load_sample(record, root, lineno))
    return Dataset(samples)


def _asset(root: Path, rel: str, record_id: str) -> Path:
    p = root / rel
    if not p.exists():
        raise MissingAsset(f"sample {record_id}: missing raster file {rel}")
    return p


def _load_sample(record: dict, root: Path, lineno: int) -> InstructionSample:
    rid = str(record["id"])
    with Image.open(_asset(root, record["image_path"], rid)) as im:
        pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)

    aff_codes = _read_png16(_asset(root, record["affordance_path"], rid))
    if aff_codes.sum() == 0:
        raise ManifestParseError(
            f"sample {rid}: affordance asset has no mass", line=lineno
        )
    # normalize the integer codes directly: v / sum(v) is an exact pixel
    # distribution and is invariant under requantization, so a reloaded
    # dataset saves back to byte-identical assets (the peak scale factor in
    # the record documents absolute magnitudes only)
    affordance = normalize_affordance(aff_codes.astype(np.float64))

    with Image.open(_asset(root, record["mask_path"], rid)) as im:
        mask_bits = np.asarray(im.convert("L")) >= 128

    depth = None
    if record.get("depth_path"):
        depth_codes = _read_png16(_asset(root, record["depth_path"], rid))
        depth_scale = float(record.get("depth_scale", 0.0))
        depth = DepthMap(depth_codes.astype(np.float64) * (depth_scale / 65535.0))

    return InstructionSample(
        sample_id=rid,
        instruction=record["instruction"],
        image=ImageRGB(pixels),
        affordance=affordance,
        mask=ObjectMask(mask_bits, category=record["category"]),
        depth=depth,
        provenance=record["provenance"],
        split=record["split"],
    )
