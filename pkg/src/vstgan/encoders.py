"""Frozen convolutional encoders.

Two encoder families share one fixed stack: the microscopic encoder is a
plain R/G/B channel split, and the macroscopic features come from a seeded,
never-trained convolution pyramid.  Named taps expose the levels the rest
of the system consumes:

    micro    identity channel split, 3 maps at full resolution
    macro    16 -> 32 channels, half resolution (style features)
    gen-enc  48 channels, quarter resolution (generator input)
    content  64 channels, eighth resolution (content features)

Weights are He-normal from the seed with zero biases and are excluded from
every optimizer, so encoding the same frame twice is bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

__all__ = [
    "TAPS",
    "UnknownTapError",
    "EncoderLayer",
    "EncoderSpec",
    "FeatureMap",
    "build_encoder",
    "encode",
    "encode_from",
]

TAPS = ("micro", "macro", "gen-enc", "content")

# (out_channels, stride) per 3x3 conv layer; ReLU after each
_LAYER_PLAN = ((16, 1), (32, 2), (48, 2), (64, 2))
_TAP_DEPTH = {"micro": 0, "macro": 2, "gen-enc": 3, "content": 4}


class UnknownTapError(ValueError):
    """Requested tap name is not one of the declared encoder taps."""


@dataclass(frozen=True)
class EncoderLayer:
    weight: Tensor
    bias: Tensor
    stride: int


@dataclass(frozen=True)
class EncoderSpec:
    seed: int | None
    layers: tuple[EncoderLayer, ...]

    @property
    def dtype(self):
        return self.layers[0].weight.dtype

    def as_dtype(self, dtype) -> "EncoderSpec":
        if np.dtype(dtype) == self.dtype:
            return self
        layers = tuple(
            EncoderLayer(l.weight.astype(dtype), l.bias.astype(dtype), l.stride) for l in self.layers
        )
        return EncoderSpec(self.seed, layers)

    def named_weights(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            out[f"encoder/l{i}/weight"] = layer.weight.data
            out[f"encoder/l{i}/bias"] = layer.bias.data
        return out

    @classmethod
    def from_named(cls, tensors: dict[str, np.ndarray], seed: int | None = None) -> "EncoderSpec":
        layers = []
        for i, (_, stride) in enumerate(_LAYER_PLAN):
            w = tensors[f"encoder/l{i}/weight"]
            b = tensors[f"encoder/l{i}/bias"]
            layers.append(EncoderLayer(Tensor(w), Tensor(b), stride))
        return cls(seed, tuple(layers))


def build_encoder(seed: int, dtype=np.float32) -> EncoderSpec:
    """He-normal seeded conv stack; same seed gives bit-identical weights."""
    rng = np.random.default_rng(seed)
    layers = []
    in_ch = 3
    for out_ch, stride in _LAYER_PLAN:
        fan_in = in_ch * 9
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(out_ch, in_ch, 3, 3))
        layers.append(EncoderLayer(
            Tensor(w.astype(dtype)),
            Tensor(np.zeros(out_ch, dtype=dtype)),
            stride,
        ))
        in_ch = out_ch
    return EncoderSpec(seed, tuple(layers))


@dataclass
class FeatureMap:
    """Encoded activations at one tap; gradients flow to the frame only."""

    values: Tensor
    level: str

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def encode(frame: Tensor, level: str, spec: EncoderSpec) -> FeatureMap:
    """Run the frozen stack up to the named tap.

    `frame` is a (3, H, W) tensor; the micro tap returns it untouched
    (identity channel split), deeper taps apply conv/ReLU layers.
    """
    depth = _TAP_DEPTH.get(level)
    if depth is None:
        raise UnknownTapError(f"unknown tap {level!r}; declared taps: {', '.join(TAPS)}")
    if not isinstance(frame, Tensor):
        frame = Tensor(np.asarray(frame))
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise T.ShapeError(f"encode: frame must be (3, H, W), got shape {frame.shape}")
    x = frame
    for layer in spec.layers[:depth]:
        x = T.relu(T.conv2d(x, layer.weight, layer.bias, stride=layer.stride))
    return FeatureMap(x, level)


def encode_from(fm: FeatureMap, level: str, spec: EncoderSpec) -> FeatureMap:
    """Continue the frozen stack from an already-encoded tap to a deeper one."""
    start = _TAP_DEPTH.get(fm.level)
    depth = _TAP_DEPTH.get(level)
    if depth is None:
        raise UnknownTapError(f"unknown tap {level!r}; declared taps: {', '.join(TAPS)}")
    if start is None or depth < start:
        raise UnknownTapError(f"cannot continue from tap {fm.level!r} to {level!r}")
    x = fm.values
    for layer in spec.layers[start:depth]:
        x = T.relu(T.conv2d(x, layer.weight, layer.bias, stride=layer.stride))
    return FeatureMap(x, level)
