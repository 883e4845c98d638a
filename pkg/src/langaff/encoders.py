"""Frozen vision and text encoders.

Two families: deterministic toy encoders that need no external assets (used
by every test and by training), and a thin adapter for plugging pretrained
feature extractors. All encoders are immutable after construction and are
never updated by training.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .data import ImageRGB
from .errors import EmptyPrompt


@dataclass(frozen=True)
class FeatureGrid:
    """Hf x Wf x Cv dense features with the pixel stride that produced them."""

    features: np.ndarray
    stride: int

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 3:
            raise ValueError(f"features must be Hf x Wf x Cv, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("features contain non-finite values")
        object.__setattr__(self, "features", f)

    @property
    def channels(self) -> int:
        return self.features.shape[2]


@dataclass(frozen=True)
class GoalEncoding:
    """Fixed-length embedding of an instruction."""

    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError(f"goal encoding must be 1-D, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("goal encoding contains non-finite values")
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


class ToyImageEncoder:
    """Per-patch channel means over the [0,1]-normalized image.

    Output is ceil(H/stride) x ceil(W/stride) x 3; edge patches average over
    whatever pixels they cover. Stateless, hence trivially frozen.
    """

    def __init__(self, stride: int = 8):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.stride = stride
        self.channels = 3

    @property
    def name(self) -> str:
        return f"toy-image/s{self.stride}c{self.channels}"

    def encode_image(self, image: ImageRGB) -> FeatureGrid:
        h, w = image.shape
        s = self.stride
        hf, wf = math.ceil(h / s), math.ceil(w / s)
        scaled = image.pixels.astype(np.float64) / 255.0
        grid = np.empty((hf, wf, 3), dtype=np.float64)
        for i in range(hf):
            for j in range(wf):
                patch = scaled[i * s : min((i + 1) * s, h), j * s : min((j + 1) * s, w)]
                grid[i, j] = patch.mean(axis=(0, 1))
        return FeatureGrid(grid, stride=s)


def _token_bucket(token: str, buckets: int) -> int:
    # blake2b is stable across processes; Python's str hash is salted.
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % buckets


class ToyTextEncoder:
    """L2-normalized hashed bag of words over lowercased whitespace tokens."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    @property
    def name(self) -> str:
        return f"toy-text/d{self.dim}"

    def encode_text(self, prompt: str) -> GoalEncoding:
        tokens = prompt.lower().split()
        if not tokens:
            raise EmptyPrompt("prompt has no tokens")
        counts = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            counts[_token_bucket(tok, self.dim)] += 1.0
        return GoalEncoding(counts / np.linalg.norm(counts))


class PretrainedVisionAdapter:
    """Wrapper for an external dense-feature extractor.

    The caller supplies `extract(pixels) -> Hf x Wf x C array` (for example a
    closure over a loaded vision backbone) together with the stride and the
    feature layer it reads. This class only does shape bookkeeping; it loads
    no weights itself and is not exercised by the acceptance suite.
    """

    def __init__(self, extract, stride: int, channels: int, layer: str = "last"):
        self._extract = extract
        self.stride = stride
        self.channels = channels
        self.layer = layer

    @property
    def name(self) -> str:
        return f"adapter-image/s{self.stride}c{self.channels}/{self.layer}"

    def encode_image(self, image: ImageRGB) -> FeatureGrid:
        feats = np.asarray(self._extract(image.pixels), dtype=np.float64)
        h, w = image.shape
        expected = (math.ceil(h / self.stride), math.ceil(w / self.stride), self.channels)
        if feats.shape != expected:
            raise ValueError(
                f"adapter returned {feats.shape}, expected {expected} for layer {self.layer!r}"
            )
        return FeatureGrid(feats, stride=self.stride)


class PretrainedTextAdapter:
    """Wrapper for an external sentence-embedding callable."""

    def __init__(self, embed, dim: int):
        self._embed = embed
        self.dim = dim

    @property
    def name(self) -> str:
        return f"adapter-text/d{self.dim}"

    def encode_text(self, prompt: str) -> GoalEncoding:
        if not prompt.strip():
            raise EmptyPrompt("prompt has no tokens")
        vec = np.asarray(self._embed(prompt), dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValueError(f"adapter returned {vec.shape}, expected ({self.dim},)")
        return GoalEncoding(vec)
