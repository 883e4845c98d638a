"""Instruction-conditioned affordance decoder.

A small convolutional decoder runs on top of frozen vision features. The
instruction embedding is projected per stage to the stage's channel width and
multiplied elementwise into the feature maps (tiled over space), so language
can only gate channels, never mix pixels. Three such gated stages upsample
back to image resolution; a 1x1 head produces per-pixel logits.

Training treats the ground-truth map as a distribution over pixels and
minimizes cross entropy against a spatial softmax of the logits. The raw
rectified logits are kept around for visualization only.

All math is explicit numpy, including the backward pass, so gradients can be
verified against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import (
    AffordanceMap,
    ImageRGB,
    GROUNDTRUTH,
    PREDICTED_LOGITS,
    PREDICTED_PROBABILITIES,
)
from .encoders import ToyImageEncoder, ToyTextEncoder
from .errors import DimensionMismatch

LOG_EPS = 1e-12  # clamp inside log; keeps the loss finite near zero mass


@dataclass(frozen=True)
class DecoderConfig:
    """Architecture knobs for the decoder."""

    stage_channels: tuple[int, int, int] = (32, 16, 8)
    kernel_size: int = 3
    upsample_factor: int = 2
    seed: int = 0

    def __post_init__(self):
        if len(self.stage_channels) != 3:
            raise ValueError("decoder uses exactly 3 fused stages")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel size must be odd (same padding)")
        if self.upsample_factor < 1:
            raise ValueError("upsample factor must be >= 1")
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))


def parameter_names(config: DecoderConfig) -> list[str]:
    """Canonical parameter ordering used for flattening and checkpoints."""
    names: list[str] = []
    for i in range(len(config.stage_channels)):
        names += [f"conv{i}_w", f"conv{i}_b", f"proj{i}_w", f"proj{i}_b"]
    names += ["head_w", "head_b"]
    return names


def init_parameters(
    config: DecoderConfig, in_channels: int, goal_dim: int
) -> dict[str, np.ndarray]:
    """Seeded uniform init in [-0.1, 0.1], with gates at the identity.

    Goal-projection biases are centered at 1 instead of 0: each fusion stage
    then starts as a near-identity channel gate. Zero-centered gates of this
    scale attenuate the forward signal by ~1e-4 across the three stages,
    which no fixed learning rate can train out of without diverging.
    """
    rng = np.random.default_rng(config.seed)
    k = config.kernel_size
    params: dict[str, np.ndarray] = {}
    c_in = in_channels
    for i, c_out in enumerate(config.stage_channels):
        params[f"conv{i}_w"] = rng.uniform(-0.1, 0.1, size=(k, k, c_in, c_out))
        params[f"conv{i}_b"] = rng.uniform(-0.1, 0.1, size=(c_out,))
        params[f"proj{i}_w"] = rng.uniform(-0.1, 0.1, size=(goal_dim, c_out))
        params[f"proj{i}_b"] = 1.0 + rng.uniform(-0.1, 0.1, size=(c_out,))
        c_in = c_out
    params["head_w"] = rng.uniform(-0.1, 0.1, size=(c_in,))
    params["head_b"] = rng.uniform(-0.1, 0.1, size=(1,))
    return params


# -- primitive ops (forward + backward) -------------------------------------
# Batched layout everywhere: activations are (N, H, W, C), goals are (N, D).

def _taps_matrix(w: np.ndarray) -> np.ndarray:
    """(k, k, Cin, Cout) kernel as a (Cin, k*k*Cout) matrix."""
    k, _, c_in, c_out = w.shape
    return np.ascontiguousarray(w.transpose(2, 0, 1, 3)).reshape(c_in, k * k * c_out)


def conv2d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Same-padding 2D convolution: one wide matmul, then shifted adds.

    All k*k tap products come out of a single (N*H*W, Cin) x (Cin, k*k*Cout)
    matmul; each tap's slab is then added into a padded output at its offset.
    One big BLAS call beats per-tap calls or im2col copies at these small
    channel widths.
    """
    n, h, wid, c_in = x.shape
    k, _, _, c_out = w.shape
    pad = k // 2
    taps = (x.reshape(-1, c_in) @ _taps_matrix(w).astype(x.dtype, copy=False)).reshape(
        n, h, wid, k * k, c_out
    )
    out_p = np.zeros((n, h + 2 * pad, wid + 2 * pad, c_out), dtype=x.dtype)
    for dr in range(k):
        for dc in range(k):
            # tap (dr, dc) reads x[r + dr - pad], so it writes out[r - dr + pad]
            out_p[:, k - 1 - dr : k - 1 - dr + h, k - 1 - dc : k - 1 - dc + wid, :] += taps[
                :, :, :, dr * k + dc, :
            ]
    out = out_p[:, pad : pad + h, pad : pad + wid, :]
    out += b.astype(x.dtype, copy=False)
    return out


def conv2d_same_backward(
    x: np.ndarray, w: np.ndarray, d_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (d_x, d_w, d_b) for conv2d_same, mirrored tap stacking."""
    n, h, wid, c_in = x.shape
    k, _, _, c_out = w.shape
    pad = k // 2
    x_flat = x.reshape(-1, c_in)
    d_out_p = np.pad(d_out, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    stacked = np.empty((n, h, wid, k * k, c_out), dtype=d_out.dtype)
    for dr in range(k):
        for dc in range(k):
            # gradient for tap (dr, dc) sits at output offset (pad-dr, pad-dc)
            stacked[:, :, :, dr * k + dc, :] = d_out_p[
                :, k - 1 - dr : k - 1 - dr + h, k - 1 - dc : k - 1 - dc + wid, :
            ]
    stacked = stacked.reshape(-1, k * k * c_out)
    w2 = _taps_matrix(w).astype(d_out.dtype, copy=False)
    d_w = (x_flat.T @ stacked).reshape(c_in, k, k, c_out).transpose(1, 2, 0, 3)
    d_x = (stacked @ w2.T).reshape(x.shape)
    d_b = d_out.sum(axis=(0, 1, 2))
    return d_x, np.ascontiguousarray(d_w), d_b


def upsample_nearest(x: np.ndarray, factor: int) -> np.ndarray:
    return x.repeat(factor, axis=1).repeat(factor, axis=2)


def upsample_nearest_backward(d_out: np.ndarray, factor: int) -> np.ndarray:
    n, h, w, c = d_out.shape
    return d_out.reshape(n, h // factor, factor, w // factor, factor, c).sum(axis=(2, 4))


def project_goal(
    weights: np.ndarray, bias: np.ndarray, goal: np.ndarray
) -> np.ndarray:
    """Affine map of the goal vector onto a stage's channel dimension."""
    goal = np.asarray(goal, dtype=np.float64)
    if goal.shape[-1] != weights.shape[0]:
        raise DimensionMismatch(
            f"goal dim {goal.shape[-1]} does not match projection input {weights.shape[0]}"
        )
    if bias.shape[0] != weights.shape[1]:
        raise DimensionMismatch(
            f"bias dim {bias.shape[0]} does not match projection output {weights.shape[1]}"
        )
    return goal @ weights + bias


def fuse(features: np.ndarray, projected_goal: np.ndarray) -> np.ndarray:
    """Tile a projected goal over space and multiply it into the features.

    out[r, c, k] = features[r, c, k] * projected_goal[k]; no spatial mixing.
    """
    features = np.asarray(features, dtype=np.float64)
    projected_goal = np.asarray(projected_goal, dtype=np.float64)
    if features.shape[-1] != projected_goal.shape[-1]:
        raise DimensionMismatch(
            f"feature channels {features.shape[-1]} != goal channels {projected_goal.shape[-1]}"
        )
    if projected_goal.ndim == 1:
        return features * projected_goal
    # batched: (N, H, W, C) * (N, C)
    return features * projected_goal[:, None, None, :]


def _bilinear_taps(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source indices (lo, hi) and hi-weights for one axis, half-pixel centers."""
    coords = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    coords = np.clip(coords, 0.0, n_in - 1.0)
    lo = np.floor(coords).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    w_hi = coords - lo
    return lo, hi, w_hi


def bilinear_resize(x: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Resize (N, H, W) maps to out_hw with bilinear interpolation."""
    n, h, w = x.shape
    oh, ow = out_hw
    r_lo, r_hi, r_w = _bilinear_taps(oh, h)
    c_lo, c_hi, c_w = _bilinear_taps(ow, w)
    top = x[:, r_lo][:, :, c_lo] * (1 - c_w) + x[:, r_lo][:, :, c_hi] * c_w
    bot = x[:, r_hi][:, :, c_lo] * (1 - c_w) + x[:, r_hi][:, :, c_hi] * c_w
    return top * (1 - r_w)[None, :, None] + bot * r_w[None, :, None]


def bilinear_resize_backward(
    d_out: np.ndarray, in_hw: tuple[int, int]
) -> np.ndarray:
    """Scatter output-gradient mass back through the interpolation weights."""
    n, oh, ow = d_out.shape
    h, w = in_hw
    r_lo, r_hi, r_w = _bilinear_taps(oh, h)
    c_lo, c_hi, c_w = _bilinear_taps(ow, w)
    d_in = np.zeros((n, h, w), dtype=d_out.dtype)
    for i in range(oh):
        row_grad = d_out[:, i, :]
        for r_idx, r_weight in ((r_lo[i], 1 - r_w[i]), (r_hi[i], r_w[i])):
            if r_weight == 0.0:
                continue
            np.add.at(d_in[:, r_idx, :], (slice(None), c_lo), row_grad * r_weight * (1 - c_w))
            np.add.at(d_in[:, r_idx, :], (slice(None), c_hi), row_grad * r_weight * c_w)
    return d_in


def spatial_softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax over all pixels of each (H, W) map; supports a batch axis.

    Computes in the input's float dtype so reduced-precision training stays
    in reduced precision; max subtraction keeps it stable either way.
    """
    arr = np.asarray(logits)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    flat = arr.reshape(arr.shape[0], -1)
    flat = flat - flat.max(axis=1, keepdims=True)
    e = np.exp(flat)
    probs = (e / e.sum(axis=1, keepdims=True)).reshape(arr.shape)
    return probs[0] if single else probs


# -- decoder forward / backward ---------------------------------------------

def decoder_forward(
    params: dict[str, np.ndarray],
    feats: np.ndarray,
    goals: np.ndarray,
    out_hw: tuple[int, int],
    config: DecoderConfig,
    keep_cache: bool = False,
):
    """Run the decoder on encoded features. feats (N,Hf,Wf,C), goals (N,D).

    Returns logits (N, H, W) and, when keep_cache, the intermediate tensors
    needed by decoder_backward.
    """
    cache: dict[str, list | np.ndarray] = {"x_in": [], "z": [], "a": [], "q": []}
    x = feats
    for i in range(len(config.stage_channels)):
        z = conv2d_same(x, params[f"conv{i}_w"], params[f"conv{i}_b"])
        if keep_cache:
            cache["x_in"].append(x)
        a = np.maximum(z, 0.0)
        q = project_goal(params[f"proj{i}_w"], params[f"proj{i}_b"], goals)
        u = fuse(a, q)
        x = upsample_nearest(u, config.upsample_factor)
        if keep_cache:
            cache["z"].append(z)
            cache["a"].append(a)
            cache["q"].append(q)
    logits_small = x @ params["head_w"] + params["head_b"][0]
    if keep_cache:
        cache["pre_head"] = x
        cache["logits_small"] = logits_small
    if logits_small.shape[1:] != tuple(out_hw):
        logits = bilinear_resize(logits_small, out_hw)
    else:
        logits = logits_small
    return (logits, cache) if keep_cache else logits


def decoder_backward(
    params: dict[str, np.ndarray],
    goals: np.ndarray,
    cache: dict,
    d_logits: np.ndarray,
    config: DecoderConfig,
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every decoder parameter."""
    grads: dict[str, np.ndarray] = {}
    logits_small = cache["logits_small"]
    if d_logits.shape != logits_small.shape:
        d_small = bilinear_resize_backward(d_logits, logits_small.shape[1:])
    else:
        d_small = d_logits
    pre_head = cache["pre_head"]
    c_last = pre_head.shape[-1]
    grads["head_w"] = pre_head.reshape(-1, c_last).T @ d_small.ravel()
    grads["head_b"] = np.array([d_small.sum()])
    d_x = d_small[..., None] * params["head_w"]

    for i in reversed(range(len(config.stage_channels))):
        d_u = upsample_nearest_backward(d_x, config.upsample_factor)
        a, q, z = cache["a"][i], cache["q"][i], cache["z"][i]
        d_a = d_u * q[:, None, None, :]
        du_a = d_u * a
        d_q = du_a.reshape(a.shape[0], -1, a.shape[-1]).sum(axis=1)
        grads[f"proj{i}_w"] = goals.T @ d_q
        grads[f"proj{i}_b"] = d_q.sum(axis=0)
        d_z = d_a * (z > 0.0)
        d_x, d_w, d_b = conv2d_same_backward(cache["x_in"][i], params[f"conv{i}_w"], d_z)
        grads[f"conv{i}_w"] = d_w
        grads[f"conv{i}_b"] = d_b
    return grads


def cross_entropy(pred: np.ndarray, gt: np.ndarray) -> float:
    """-sum(gt * log(max(pred, eps))) over all pixels."""
    return float(-(gt * np.log(np.maximum(pred, LOG_EPS))).sum(dtype=np.float64))


def cross_entropy_grad_wrt_logits(probs: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Gradient of the cross entropy through the spatial softmax.

    Treats the log clamp as the identity: the clamp only bites below 1e-12,
    and pretending it is not there keeps a pull-back gradient on pixels whose
    mass collapsed, so training can recover instead of stalling. Matches
    finite differences exactly wherever the clamp is inactive.
    """
    mass = gt.sum(axis=(-1, -2), keepdims=True)
    return probs * mass - gt


def loss(pred: AffordanceMap, gt: AffordanceMap) -> float:
    """Pixel-distribution cross entropy between prediction and ground truth."""
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    if pred.kind != PREDICTED_PROBABILITIES:
        raise ValueError(f"pred must be predicted-probabilities, got {pred.kind!r}")
    if gt.kind != GROUNDTRUTH:
        raise ValueError(f"gt must be groundtruth, got {gt.kind!r}")
    for name, m in (("pred", pred), ("gt", gt)):
        total = float(m.values.sum())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"{name} sums to {total:.8f}, expected 1.0")
    return cross_entropy(pred.values, gt.values)


# -- whole-model forward -----------------------------------------------------

@dataclass
class ModelCheckpoint:
    """Decoder parameters plus everything needed to rebuild the model."""

    config: DecoderConfig
    in_channels: int
    goal_dim: int
    params: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    version: str = "1"

    def copy(self) -> "ModelCheckpoint":
        return ModelCheckpoint(
            config=self.config,
            in_channels=self.in_channels,
            goal_dim=self.goal_dim,
            params={k: v.copy() for k, v in self.params.items()},
            metadata=dict(self.metadata),
            version=self.version,
        )


def forward(
    image: ImageRGB,
    prompt: str,
    checkpoint: ModelCheckpoint,
    image_encoder=None,
    text_encoder=None,
) -> tuple[AffordanceMap, AffordanceMap]:
    """Predict logits and the pixel-probability map for one image/prompt."""
    image_encoder = image_encoder or ToyImageEncoder()
    text_encoder = text_encoder or ToyTextEncoder()
    grid = image_encoder.encode_image(image)
    goal = text_encoder.encode_text(prompt)
    if grid.channels != checkpoint.in_channels:
        raise DimensionMismatch(
            f"encoder produced {grid.channels} channels, checkpoint expects {checkpoint.in_channels}"
        )
    if goal.dim != checkpoint.goal_dim:
        raise DimensionMismatch(
            f"goal dim {goal.dim}, checkpoint expects {checkpoint.goal_dim}"
        )
    logits = decoder_forward(
        checkpoint.params,
        grid.features[None],
        goal.vector[None],
        image.shape,
        checkpoint.config,
    )[0]
    probs = spatial_softmax(logits)
    return (
        AffordanceMap(logits, kind=PREDICTED_LOGITS),
        AffordanceMap(probs, kind=PREDICTED_PROBABILITIES),
    )


def raw_activation_map(logits_map: AffordanceMap) -> np.ndarray:
    """Rectified logits; visualization-friendly non-negative raw map."""
    if logits_map.kind != PREDICTED_LOGITS:
        raise ValueError("expected a predicted-logits map")
    return np.maximum(logits_map.values, 0.0)


def predict_point(
    image: ImageRGB,
    prompt: str,
    checkpoint: ModelCheckpoint,
    image_encoder=None,
    text_encoder=None,
) -> tuple[tuple[int, int], AffordanceMap]:
    """Most-affordant pixel plus the full probability map."""
    _, probs = forward(image, prompt, checkpoint, image_encoder, text_encoder)
    return probs.argmax_pixel(), probs
