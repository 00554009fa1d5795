"""Deconvolutional adversarial synthesis of real training samples.

The discriminator scores every spatial location of the style-tap features
(each location's receptive field is one patch).  Real samples are produced
by directly optimizing the pixels of every other source frame against the
discriminator, the content features of the source frame, a smoothness
prior, and the evolve-sync loss -- in 3-frame segments anchored on the
trailing two frames of the previous segment, with the discriminator updated
after each pixel step.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .encoders import EncoderSpec, FeatureMap, build_encoder, encode, encode_from
from .evolvesync import KernelSpec, LossWeights, evolve_sync_loss, evolvement_matrices
from .optim import Adam
from .tensor import NonFiniteError, ShapeError, Tensor, gradients
from .video import RealSampleSet, VideoSequence, frame_to_tensor, tensor_to_frame

__all__ = [
    "REAL",
    "FAKE",
    "WrongTapError",
    "SynthesisError",
    "DiscriminatorParams",
    "d_score",
    "style_loss",
    "content_loss",
    "tv_prior",
    "d_update",
    "synthesis_objective",
    "synthesize_real_samples",
]

REAL = 1
FAKE = 0

_STYLE_TAP = "macro"
_CONTENT_TAP = "content"


class WrongTapError(ValueError):
    """Features come from a different tap than the op expects."""


class SynthesisError(RuntimeError):
    """Real-sample synthesis aborted (empty input or non-finite loss)."""


@dataclass
class DiscriminatorParams:
    """Style-branch patch classifier: conv3x3 -> BN -> LReLU, twice, then 1x1 scores."""

    conv1_w: Tensor
    conv1_b: Tensor
    bn1_gamma: Tensor
    bn1_beta: Tensor
    conv2_w: Tensor
    conv2_b: Tensor
    bn2_gamma: Tensor
    bn2_beta: Tensor
    score_w: Tensor
    score_b: Tensor

    @classmethod
    def init(cls, seed: int, channels: int = 32, dtype=np.float32) -> "DiscriminatorParams":
        rng = np.random.default_rng(seed)

        def he(shape):
            fan_in = shape[1] * shape[2] * shape[3]
            return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), shape).astype(dtype),
                          requires_grad=True)

        def zeros(n):
            return Tensor(np.zeros(n, dtype=dtype), requires_grad=True)

        def ones(n):
            return Tensor(np.ones(n, dtype=dtype), requires_grad=True)

        c = channels
        return cls(
            conv1_w=he((c, c, 3, 3)), conv1_b=zeros(c),
            bn1_gamma=ones(c), bn1_beta=zeros(c),
            conv2_w=he((c, c, 3, 3)), conv2_b=zeros(c),
            bn2_gamma=ones(c), bn2_beta=zeros(c),
            score_w=he((1, c, 1, 1)), score_b=zeros(1),
        )

    @property
    def channels(self) -> int:
        return self.conv1_w.shape[1]

    def params(self) -> list[Tensor]:
        return [self.conv1_w, self.conv1_b, self.bn1_gamma, self.bn1_beta,
                self.conv2_w, self.conv2_b, self.bn2_gamma, self.bn2_beta,
                self.score_w, self.score_b]

    def named(self) -> dict[str, np.ndarray]:
        keys = ("conv1_w", "conv1_b", "bn1_gamma", "bn1_beta",
                "conv2_w", "conv2_b", "bn2_gamma", "bn2_beta", "score_w", "score_b")
        return {f"discriminator/{k}": getattr(self, k).data for k in keys}

    def astype(self, dtype) -> "DiscriminatorParams":
        kwargs = {k: getattr(self, k).astype(dtype) for k in
                  ("conv1_w", "conv1_b", "bn1_gamma", "bn1_beta",
                   "conv2_w", "conv2_b", "bn2_gamma", "bn2_beta", "score_w", "score_b")}
        return DiscriminatorParams(**kwargs)


def d_score(features: FeatureMap, d: DiscriminatorParams) -> Tensor:
    """Patch score map: one scalar per spatial location of the style features."""
    if features.level != _STYLE_TAP:
        raise WrongTapError(
            f"d_score expects style-tap ({_STYLE_TAP!r}) features, got {features.level!r}")
    if features.channels != d.channels:
        raise ShapeError(
            f"d_score: features have {features.channels} channels, discriminator expects {d.channels}")
    x = T.leaky_relu(T.batch_norm(T.conv2d(features.values, d.conv1_w, d.conv1_b),
                                  d.bn1_gamma, d.bn1_beta))
    x = T.leaky_relu(T.batch_norm(T.conv2d(x, d.conv2_w, d.conv2_b),
                                  d.bn2_gamma, d.bn2_beta))
    return T.conv2d(x, d.score_w, d.score_b)


def style_loss(scores: Tensor, label: int) -> Tensor:
    """Mean hinge over patch scores.

    Labels follow the 1=real / 0=fake convention and map to +1/-1 inside the
    hinge, so the fake branch max(0, 1 + s) carries signal rather than the
    constant the raw 0 label would give.
    """
    if label not in (REAL, FAKE):
        raise ValueError(f"style_loss: label must be {REAL} (real) or {FAKE} (fake), got {label}")
    sign = 1.0 if label == REAL else -1.0
    margin = 1.0 - T.scalar_multiply(scores, sign)
    return T.mean(T.relu(margin))


def content_loss(fa, fb) -> Tensor:
    """Mean squared error between two feature maps."""
    va = fa.values if isinstance(fa, FeatureMap) else fa
    vb = fb.values if isinstance(fb, FeatureMap) else fb
    if va.shape != vb.shape:
        raise ShapeError(f"content_loss: feature shapes {va.shape} and {vb.shape} differ")
    return T.mean(T.square(T.subtract(va, vb)))


def tv_prior(frame: Tensor) -> Tensor:
    """Squared total variation: sum of squared forward differences, both axes."""
    if frame.ndim != 3:
        raise ShapeError(f"tv_prior: expected (C, H, W) frame, got shape {frame.shape}")
    _, h, w = frame.shape
    terms = []
    if h > 1:
        dv = T.subtract(T.slice_axis(frame, 1, 1, h), T.slice_axis(frame, 1, 0, h - 1))
        terms.append(T.sum(T.square(dv)))
    if w > 1:
        dh = T.subtract(T.slice_axis(frame, 2, 1, w), T.slice_axis(frame, 2, 0, w - 1))
        terms.append(T.sum(T.square(dh)))
    if not terms:
        return T.sum(T.scalar_multiply(frame, 0.0))
    total = terms[0]
    for t in terms[1:]:
        total = T.add(total, t)
    return total


def _sum_terms(terms: Sequence[Tensor]) -> Tensor:
    total = terms[0]
    for t in terms[1:]:
        total = T.add(total, t)
    return total


def discriminator_objective(real_feats: Sequence[FeatureMap],
                            fake_feats: Sequence[FeatureMap],
                            d: DiscriminatorParams) -> Tensor:
    terms = [style_loss(d_score(f, d), REAL) for f in real_feats]
    terms += [style_loss(d_score(f, d), FAKE) for f in fake_feats]
    if not terms:
        raise ValueError("discriminator_objective: no feature batches given")
    return _sum_terms(terms)


def d_update(real_feats: Sequence[FeatureMap], fake_feats: Sequence[FeatureMap],
             d: DiscriminatorParams, opt: Adam) -> float:
    """One ADAM step on the discriminator objective; returns its value."""
    total = discriminator_objective(real_feats, fake_feats, d)
    opt.step(gradients(total, d.params()))
    return total.item()


def _const_feature(fm: FeatureMap) -> FeatureMap:
    return FeatureMap(Tensor(fm.values.data.copy()), fm.level)


def synthesis_objective(x_window: Sequence[Tensor], anchor_y: Sequence[Tensor],
                        active_y: Sequence[Tensor], d: DiscriminatorParams,
                        spec: EncoderSpec, w: LossWeights, kernel: KernelSpec,
                        *, x_sets: dict | None = None,
                        anchor_macro: Sequence[FeatureMap] | None = None,
                        content_targets: Sequence[FeatureMap] | None = None
                        ) -> tuple[Tensor, dict]:
    """Pixel objective for one segment.

    Per active frame: style hinge on its patch scores, content MSE against
    the matching source frame, and the weighted smoothness prior.  The
    evolve-sync term spans the anchors plus the active frames; anchors are
    constants.  Returns the scalar total and a float breakdown.
    """
    if len(x_window) != len(anchor_y) + len(active_y):
        raise ShapeError(
            f"synthesis_objective: window has {len(x_window)} source frames for "
            f"{len(anchor_y)} anchors + {len(active_y)} active frames")
    active_macro = [encode(f, _STYLE_TAP, spec) for f in active_y]
    if content_targets is None:
        offset = len(anchor_y)
        content_targets = [encode(x_window[offset + k], _CONTENT_TAP, spec)
                           for k in range(len(active_y))]

    style_terms = [style_loss(d_score(fm, d), REAL) for fm in active_macro]
    content_terms = [content_loss(encode_from(fm, _CONTENT_TAP, spec), target)
                     for fm, target in zip(active_macro, content_targets)]
    tv_terms = [T.scalar_multiply(tv_prior(f), w.omega) for f in active_y]

    total = _sum_terms(style_terms + content_terms + tv_terms)
    parts = {
        "style": sum(t.item() for t in style_terms),
        "content": sum(t.item() for t in content_terms),
        "tv": sum(t.item() for t in tv_terms),
        "es": 0.0,
    }
    y_window = list(anchor_y) + list(active_y)
    if len(y_window) >= 2 and (w.alpha_micro > 0 or w.alpha_macro > 0):
        y_macro = list(anchor_macro) if anchor_macro is not None else [None] * len(anchor_y)
        if len(y_macro) != len(anchor_y):
            raise ShapeError("synthesis_objective: anchor_macro must align with anchor_y")
        es = evolve_sync_loss(list(x_window), y_window, w, spec, kernel,
                              x_sets=x_sets, y_macro=y_macro + active_macro,
                              active_from=len(anchor_y))
        parts["es"] = es.item()
        total = T.add(total, es)
    parts["total"] = total.item()
    return total, parts


def synthesize_real_samples(x: VideoSequence, style: np.ndarray, cfg) -> RealSampleSet:
    """Iterative deconvolution of real samples on every other source frame.

    Frames are initialized to the even-indexed source frames and optimized
    segment by segment; each segment sees the last `cfg.anchor_frames` frames
    of the previous segment as constants inside the evolve-sync term.  The
    discriminator trains in tandem (style image real, current iterates fake).
    Returned frames are clamped to [0, 1] only at the end.
    """
    if len(x) < 1:
        raise SynthesisError("synthesize_real_samples: empty source video")
    spec = build_encoder(cfg.encoder_seed)
    w: LossWeights = cfg.weights
    kernel: KernelSpec = cfg.kernel
    d_seed = int(np.random.SeedSequence(cfg.seed).generate_state(1)[0])
    d = DiscriminatorParams.init(d_seed)
    adam_d = Adam(d.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    indices = list(range(0, len(x), 2))
    x_prime = [frame_to_tensor(x.frames[i]) for i in indices]
    y_data = [t.data.copy() for t in x_prime]
    style_feat = _const_feature(encode(frame_to_tensor(style), _STYLE_TAP, spec))

    history: list[dict] = []
    stats: list[dict] = [{} for _ in indices]

    for seg_idx, seg_start in enumerate(range(0, len(x_prime), cfg.segment_size)):
        seg = list(range(seg_start, min(seg_start + cfg.segment_size, len(x_prime))))
        anchors = list(range(max(0, seg_start - cfg.anchor_frames), seg_start))
        leaves = [Tensor(y_data[p], requires_grad=True, name=f"yprime_{indices[p]:05d}")
                  for p in seg]
        adam_y = Adam(leaves, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
        anchor_y = [Tensor(y_data[p]) for p in anchors]
        window = anchors + seg
        x_window = [x_prime[p] for p in window]
        x_sets = evolvement_matrices(x_window, w.delta, spec, w) if len(window) >= 2 else None
        anchor_macro = [_const_feature(encode(t, _STYLE_TAP, spec)) for t in anchor_y]
        content_targets = [_const_feature(encode(x_prime[p], _CONTENT_TAP, spec)) for p in seg]

        parts: dict | None = None
        for it in range(cfg.synth_iterations):
            try:
                total, parts = synthesis_objective(
                    x_window, anchor_y, leaves, d, spec, w, kernel,
                    x_sets=x_sets, anchor_macro=anchor_macro,
                    content_targets=content_targets)
                adam_y.step(gradients(total, leaves))
                d_loss = None
                if (it + 1) % cfg.synth_d_ratio == 0:
                    fakes = [_const_feature(encode(leaf.detach(), _STYLE_TAP, spec))
                             for leaf in leaves]
                    d_loss = d_update([style_feat], fakes, d, adam_d)
            except NonFiniteError as e:
                raise SynthesisError(
                    f"non-finite loss at segment {seg_idx} iteration {it}: {e}") from e
            row = {"phase": "synthesis", "segment": seg_idx, "iteration": it}
            row.update(parts)
            if d_loss is not None:
                row["d"] = d_loss
            history.append(row)

        for k, p in enumerate(seg):
            y_data[p] = leaves[k].data.copy()
            stats[p] = {"segment": seg_idx}
            if parts is not None:
                stats[p].update({key: parts[key] for key in
                                 ("total", "style", "content", "es", "tv")})

    frames = [tensor_to_frame(Tensor(arr)) for arr in y_data]
    return RealSampleSet(indices, frames, stats=stats, history=history)
