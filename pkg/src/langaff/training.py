"""Full-batch gradient-descent training and checkpoint serialization."""

from __future__ import annotations

import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .data import Dataset, validate_sample
from .encoders import ToyImageEncoder, ToyTextEncoder
from .errors import CheckpointError, EmptyDataset, NonFiniteLoss
from .model import (
    DecoderConfig,
    ModelCheckpoint,
    cross_entropy,
    cross_entropy_grad_wrt_logits,
    decoder_backward,
    decoder_forward,
    init_parameters,
    parameter_names,
    spatial_softmax,
)

CHECKPOINT_VERSION = "1"


def dataset_fingerprint(dataset: Dataset) -> str:
    """Content hash over sample ids, instructions, and raster bytes."""
    digest = hashlib.sha256()
    for s in dataset:
        digest.update(s.sample_id.encode())
        digest.update(s.instruction.encode())
        digest.update(s.image.pixels.tobytes())
        digest.update(s.affordance.values.tobytes())
        digest.update(s.mask.bits.tobytes())
        if s.depth is not None:
            digest.update(s.depth.depths.tobytes())
    return digest.hexdigest()


def batch_loss_and_grads(
    params: dict[str, np.ndarray],
    feats: np.ndarray,
    goals: np.ndarray,
    gts: np.ndarray,
    config: DecoderConfig,
    chunk: int = 32,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross entropy over the batch and its parameter gradients.

    Samples are processed in chunks to bound activation memory; the result is
    the exact full-batch mean either way. Dtype follows the inputs: cast
    params and rasters to float32 for reduced-precision training.
    """
    n = feats.shape[0]
    out_hw = gts.shape[1:]
    total_loss = 0.0
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        logits, cache = decoder_forward(
            params, feats[sl], goals[sl], out_hw, config, keep_cache=True
        )
        probs = spatial_softmax(logits)
        total_loss += cross_entropy(probs, gts[sl])
        d_logits = (cross_entropy_grad_wrt_logits(probs, gts[sl]) / n).astype(
            feats.dtype, copy=False
        )
        chunk_grads = decoder_backward(params, goals[sl], cache, d_logits, config)
        for k in grads:
            grads[k] += chunk_grads[k]
    return total_loss / n, grads


def train(
    dataset: Dataset,
    config: DecoderConfig,
    epochs: int,
    learning_rate: float,
    image_encoder=None,
    text_encoder=None,
    chunk: int = 32,
    log_every: int = 0,
    compute_dtype=np.float64,
) -> ModelCheckpoint:
    """Fit the decoder by full-batch gradient descent with a fixed step size.

    Encoders stay frozen; their outputs are computed once up front. Identical
    seed, dataset, and config give a bit-identical checkpoint. compute_dtype
    float32 halves memory traffic on big rasters; master parameters and the
    returned checkpoint stay float64 either way.
    """
    if len(dataset) == 0:
        raise EmptyDataset("training requires at least one sample")
    for s in dataset:
        problems = validate_sample(s)
        if problems:
            raise ValueError(f"sample {s.sample_id}: {problems[0]}")
    shapes = {s.image.shape for s in dataset}
    if len(shapes) != 1:
        raise ValueError(f"training expects a single raster size, got {sorted(shapes)}")

    image_encoder = image_encoder or ToyImageEncoder()
    text_encoder = text_encoder or ToyTextEncoder()
    feats = np.stack(
        [image_encoder.encode_image(s.image).features for s in dataset]
    ).astype(compute_dtype)
    goals = np.stack(
        [text_encoder.encode_text(s.instruction).vector for s in dataset]
    ).astype(compute_dtype)
    gts = np.stack([s.affordance.values for s in dataset]).astype(compute_dtype)

    params = init_parameters(config, feats.shape[3], goals.shape[1])
    losses: list[float] = []
    for epoch in range(epochs):
        compute_params = {k: v.astype(compute_dtype, copy=False) for k, v in params.items()}
        mean_loss, grads = batch_loss_and_grads(
            compute_params, feats, goals, gts, config, chunk
        )
        if not np.isfinite(mean_loss):
            raise NonFiniteLoss(epoch, mean_loss)
        losses.append(mean_loss)
        for k in params:
            params[k] -= learning_rate * grads[k].astype(np.float64)
        if log_every and (epoch % log_every == 0 or epoch == epochs - 1):
            print(f"epoch {epoch:4d}  loss {mean_loss:.5f}")

    compute_params = {k: v.astype(compute_dtype, copy=False) for k, v in params.items()}
    logits = _forward_all(compute_params, feats, goals, gts.shape[1:], config, chunk)
    probs = spatial_softmax(logits)
    final_loss = cross_entropy(probs, gts) / len(dataset)

    metadata = {
        "epochs": epochs,
        "learning_rate": learning_rate,
        "final_loss": final_loss,
        "loss_curve": losses,
        "dataset_hash": dataset_fingerprint(dataset),
        "n_samples": len(dataset),
        "image_encoder": image_encoder.name,
        "text_encoder": text_encoder.name,
    }
    return ModelCheckpoint(
        config=config,
        in_channels=feats.shape[3],
        goal_dim=goals.shape[1],
        params=params,
        metadata=metadata,
        version=CHECKPOINT_VERSION,
    )


def _forward_all(params, feats, goals, out_hw, config, chunk):
    parts = []
    for start in range(0, feats.shape[0], chunk):
        sl = slice(start, start + chunk)
        parts.append(decoder_forward(params, feats[sl], goals[sl], out_hw, config))
    return np.concatenate(parts, axis=0)


# -- checkpoint file format ---------------------------------------------------
# A zip of little-endian .npy tensors plus one JSON header; numpy's savez
# gives the container, the header carries config/metadata/version.

def save_checkpoint(checkpoint: ModelCheckpoint, path: str | Path) -> None:
    path = Path(path)
    header = {
        "version": checkpoint.version,
        "config": {
            "stage_channels": list(checkpoint.config.stage_channels),
            "kernel_size": checkpoint.config.kernel_size,
            "upsample_factor": checkpoint.config.upsample_factor,
            "seed": checkpoint.config.seed,
        },
        "in_channels": checkpoint.in_channels,
        "goal_dim": checkpoint.goal_dim,
        "metadata": checkpoint.metadata,
        "param_order": parameter_names(checkpoint.config),
    }
    arrays = {
        f"param.{name}": np.ascontiguousarray(checkpoint.params[name], dtype="<f8")
        for name in parameter_names(checkpoint.config)
    }
    buf = io.BytesIO()
    np.savez(buf, header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **arrays)
    path.write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(
                    f"unsupported checkpoint version {header.get('version')!r}"
                )
            config = DecoderConfig(
                stage_channels=tuple(header["config"]["stage_channels"]),
                kernel_size=header["config"]["kernel_size"],
                upsample_factor=header["config"]["upsample_factor"],
                seed=header["config"]["seed"],
            )
            params = {
                name: np.asarray(data[f"param.{name}"], dtype=np.float64)
                for name in header["param_order"]
            }
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    return ModelCheckpoint(
        config=config,
        in_channels=header["in_channels"],
        goal_dim=header["goal_dim"],
        params=params,
        metadata=header["metadata"],
        version=header["version"],
    )
