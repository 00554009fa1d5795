"""Feed-forward generator and its adversarial training.

The generator reuses the frozen encoder (gen-enc tap), decodes with a
convolution followed by two fractional-strided (transposed) convolutions
back to full resolution, and finishes with a convolutional recurrent output
layer: y_t = sigmoid(W_x * decoded_t + W_h * y_{t-1} + b).  The recurrence
carries saturation from frames that have real samples to the frames that
do not.  Training alternates generator and discriminator steps on random
even-aligned windows of consecutive frames; gradients truncate at window
boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .encoders import EncoderSpec, FeatureMap, build_encoder, encode
from .evolvesync import KernelSpec, LossWeights, evolve_sync_loss, evolvement_matrices
from .mdan import REAL, DiscriminatorParams, content_loss, d_score, d_update, style_loss, tv_prior
from .optim import Adam
from .tensor import NonFiniteError, ShapeError, Tensor, gradients
from .video import RealSampleSet, VideoSequence, frame_to_tensor, from_tensors, to_tensors

__all__ = [
    "GeneratorError",
    "AlignmentError",
    "TrainingDiverged",
    "GeneratorParams",
    "g_forward",
    "gan_objective",
    "train_gan",
    "stylize",
]

_STYLE_TAP = "macro"
_CONTENT_TAP = "content"
_GEN_TAP = "gen-enc"

_PARAM_KEYS = ("dec1_w", "dec1_b", "bn1_gamma", "bn1_beta",
               "up1_w", "up1_b", "bn2_gamma", "bn2_beta",
               "up2_w", "up2_b", "bn3_gamma", "bn3_beta",
               "out_w", "out_b", "rec_wx", "rec_wh", "rec_b")


class GeneratorError(RuntimeError):
    """Forward pass produced a non-finite activation."""


class AlignmentError(ValueError):
    """Real samples do not line up with the even frames of the source video."""


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, history: list[dict]):
        super().__init__(message)
        self.history = history


@dataclass
class GeneratorParams:
    dec1_w: Tensor
    dec1_b: Tensor
    bn1_gamma: Tensor
    bn1_beta: Tensor
    up1_w: Tensor
    up1_b: Tensor
    bn2_gamma: Tensor
    bn2_beta: Tensor
    up2_w: Tensor
    up2_b: Tensor
    bn3_gamma: Tensor
    bn3_beta: Tensor
    out_w: Tensor
    out_b: Tensor
    rec_wx: Tensor
    rec_wh: Tensor
    rec_b: Tensor
    recurrent: bool = True

    @classmethod
    def init(cls, seed: int, recurrent: bool = True, dtype=np.float32) -> "GeneratorParams":
        rng = np.random.default_rng(seed)

        def he(shape, zero=False):
            if zero:
                return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)
            fan_in = shape[1] * shape[2] * shape[3]
            return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), shape).astype(dtype),
                          requires_grad=True)

        def zeros(n):
            return Tensor(np.zeros(n, dtype=dtype), requires_grad=True)

        def ones(n):
            return Tensor(np.ones(n, dtype=dtype), requires_grad=True)

        return cls(
            dec1_w=he((48, 48, 3, 3)), dec1_b=zeros(48),
            bn1_gamma=ones(48), bn1_beta=zeros(48),
            up1_w=he((48, 32, 3, 3)), up1_b=zeros(32),
            bn2_gamma=ones(32), bn2_beta=zeros(32),
            up2_w=he((32, 16, 3, 3)), up2_b=zeros(16),
            bn3_gamma=ones(16), bn3_beta=zeros(16),
            out_w=he((3, 16, 3, 3)), out_b=zeros(3),
            rec_wx=he((3, 3, 3, 3)), rec_wh=he((3, 3, 3, 3), zero=not recurrent),
            rec_b=zeros(3),
            recurrent=recurrent,
        )

    def params(self) -> list[Tensor]:
        keys = [k for k in _PARAM_KEYS if self.recurrent or k != "rec_wh"]
        return [getattr(self, k) for k in keys]

    def named(self) -> dict[str, np.ndarray]:
        return {f"generator/{k}": getattr(self, k).data for k in _PARAM_KEYS}

    def astype(self, dtype) -> "GeneratorParams":
        kwargs = {k: getattr(self, k).astype(dtype) for k in _PARAM_KEYS}
        return GeneratorParams(**kwargs, recurrent=self.recurrent)

    @classmethod
    def from_named(cls, tensors: dict[str, np.ndarray], recurrent: bool = True) -> "GeneratorParams":
        kwargs = {k: Tensor(tensors[f"generator/{k}"].copy(), requires_grad=True)
                  for k in _PARAM_KEYS}
        return cls(**kwargs, recurrent=recurrent)


def _frames_in(x) -> list[Tensor]:
    if isinstance(x, VideoSequence):
        return to_tensors(x)
    return [f if isinstance(f, Tensor) else frame_to_tensor(np.asarray(f)) for f in x]


def g_forward(x, g: GeneratorParams, spec: EncoderSpec) -> list[Tensor]:
    """Stylize a frame sequence; output length and frame shapes equal the input's.

    The hidden predecessor is zero at the first frame, so frame 0 sees only
    the feed-forward path.
    """
    frames = _frames_in(x)
    outs: list[Tensor] = []
    prev: Tensor | None = None
    for t, frame in enumerate(frames):
        _, h, w = frame.shape
        h2, w2 = -(-h // 2), -(-w // 2)
        stage = "encoder"
        try:
            z = encode(frame, _GEN_TAP, spec).values
            stage = "dec1"
            z = T.leaky_relu(T.batch_norm(T.conv2d(z, g.dec1_w, g.dec1_b),
                                          g.bn1_gamma, g.bn1_beta))
            stage = "up1"
            z = T.leaky_relu(T.batch_norm(
                T.conv2d_transpose(z, g.up1_w, g.up1_b, stride=2, output_hw=(h2, w2)),
                g.bn2_gamma, g.bn2_beta))
            stage = "up2"
            z = T.leaky_relu(T.batch_norm(
                T.conv2d_transpose(z, g.up2_w, g.up2_b, stride=2, output_hw=(h, w)),
                g.bn3_gamma, g.bn3_beta))
            stage = "out_conv"
            decoded = T.conv2d(z, g.out_w, g.out_b)
            stage = "recurrent"
            pre = T.conv2d(decoded, g.rec_wx, g.rec_b)
            if prev is not None and g.recurrent:
                pre = T.add(pre, T.conv2d(prev, g.rec_wh))
            y = T.sigmoid(pre)
        except NonFiniteError as e:
            raise GeneratorError(f"non-finite activation in {stage} at frame {t}: {e}") from e
        outs.append(y)
        prev = y
    return outs


def _paired_positions(window_start: int, count: int, real: RealSampleSet) -> list[tuple[int, int]]:
    pairs = []
    for local in range(count):
        gi = window_start + local
        if gi % 2 == 0:
            if gi // 2 >= len(real.frames):
                raise AlignmentError(
                    f"no real sample for even frame {gi} (have indices {real.indices})")
            pairs.append((local, gi))
    return pairs


def gan_objective(x_frames: Sequence[Tensor], y_frames: Sequence[Tensor],
                  real: RealSampleSet, d: DiscriminatorParams, spec: EncoderSpec,
                  w: LossWeights, kernel: KernelSpec, *, window_start: int = 0,
                  content_targets: dict[int, FeatureMap] | None = None,
                  x_sets: dict | None = None) -> tuple[Tensor, dict]:
    """Generator objective over one window of consecutive frames.

    Per synthesized frame: style hinge on its patch scores plus the weighted
    smoothness prior; the evolve-sync term spans the window; the content MSE
    against the matching real sample applies to paired (even) frames only.
    The real samples' own style term is constant for the generator and
    enters only the discriminator update.
    """
    if len(x_frames) != len(y_frames):
        raise ShapeError(f"gan_objective: {len(x_frames)} source frames for "
                         f"{len(y_frames)} synthesized frames")
    y_macro = [encode(y, _STYLE_TAP, spec) for y in y_frames]
    style_terms = [style_loss(d_score(fm, d), REAL) for fm in y_macro]
    tv_terms = [T.scalar_multiply(tv_prior(y), w.omega) for y in y_frames]

    content_terms = []
    paired = _paired_positions(window_start, len(y_frames), real)
    for local, gi in paired:
        if content_targets is not None and gi in content_targets:
            target = content_targets[gi]
        else:
            target = encode(frame_to_tensor(real.frame_for(gi)), _CONTENT_TAP, spec)
        content_terms.append(content_loss(encode(y_frames[local], _CONTENT_TAP, spec), target))

    terms = style_terms + tv_terms + content_terms
    total = terms[0]
    for t in terms[1:]:
        total = T.add(total, t)
    parts = {
        "style": sum(t.item() for t in style_terms),
        "tv": sum(t.item() for t in tv_terms),
        "content": sum(t.item() for t in content_terms),
        "es": 0.0,
        "n_content_terms": len(content_terms),
    }
    if len(y_frames) >= 2 and (w.alpha_micro > 0 or w.alpha_macro > 0):
        es = evolve_sync_loss(list(x_frames), list(y_frames), w, spec, kernel,
                              x_sets=x_sets, y_macro=y_macro)
        parts["es"] = es.item()
        total = T.add(total, es)
    parts["total"] = total.item()
    return total, parts


def _validate_alignment(x: VideoSequence, real: RealSampleSet) -> None:
    expected = list(range(0, len(x), 2))
    if real.indices != expected:
        raise AlignmentError(
            f"real-sample indices {real.indices} do not match the even frames "
            f"{expected} of a {len(x)}-frame video")
    for i, frame in zip(real.indices, real.frames):
        if frame.shape != x.frames[0].shape:
            raise AlignmentError(
                f"real sample {i} has shape {frame.shape}, video frames are "
                f"{x.frames[0].shape}")


def train_gan(x: VideoSequence, real: RealSampleSet, style: np.ndarray,
              cfg) -> tuple[GeneratorParams, list[dict]]:
    """Adversarial generator training against unpaired real samples.

    Both networks start from scratch.  Each iteration draws an even-aligned
    window of cfg.batch consecutive frames, takes one generator step on the
    window objective, then (every cfg.gan_d_ratio iterations) one
    discriminator step with the real samples' patches as real and the
    generator outputs as fake.  The style image is accepted for interface
    parity and logging; style supervision reaches the generator through the
    discriminator trained on the synthesized real samples.
    """
    _validate_alignment(x, real)
    if len(x) < cfg.batch:
        raise AlignmentError(f"video has {len(x)} frames, window needs {cfg.batch}")
    del style

    spec = build_encoder(cfg.encoder_seed)
    w: LossWeights = cfg.weights
    kernel: KernelSpec = cfg.kernel
    g_seed, d_seed, win_seed = (int(v) for v in np.random.SeedSequence(cfg.seed).generate_state(3))
    g = GeneratorParams.init(g_seed, recurrent=cfg.recurrent)
    d = DiscriminatorParams.init(d_seed)
    adam_g = Adam(g.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    adam_d = Adam(d.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(win_seed)

    frames = to_tensors(x)
    starts = list(range(0, len(x) - cfg.batch + 1, 2))
    real_style_feats: dict[int, FeatureMap] = {}
    content_targets: dict[int, FeatureMap] = {}
    for gi in real.indices:
        t = frame_to_tensor(real.frame_for(gi))
        real_style_feats[gi] = _const(encode(t, _STYLE_TAP, spec))
        content_targets[gi] = _const(encode(t, _CONTENT_TAP, spec))
    window_sets: dict[int, dict] = {}

    history: list[dict] = []
    for it in range(cfg.gan_iterations):
        start = starts[int(rng.integers(len(starts)))]
        x_win = frames[start:start + cfg.batch]
        if start not in window_sets:
            window_sets[start] = evolvement_matrices(x_win, w.delta, spec, w)
        try:
            y = g_forward(x_win, g, spec)
            total, parts = gan_objective(
                x_win, y, real, d, spec, w, kernel, window_start=start,
                content_targets=content_targets, x_sets=window_sets[start])
            adam_g.step(gradients(total, g.params()))
            d_loss = None
            if (it + 1) % cfg.gan_d_ratio == 0:
                real_feats = [real_style_feats[gi]
                              for _, gi in _paired_positions(start, cfg.batch, real)]
                fake_feats = [_const(encode(yt.detach(), _STYLE_TAP, spec)) for yt in y]
                d_loss = d_update(real_feats, fake_feats, d, adam_d)
        except (NonFiniteError, GeneratorError) as e:
            raise TrainingDiverged(f"non-finite loss at iteration {it}: {e}", history) from e
        if parts["total"] > 1e6:
            raise TrainingDiverged(
                f"objective exploded to {parts['total']:.3e} at iteration {it}", history)
        row = {"phase": "gan", "iteration": it, "window_start": start}
        row.update(parts)
        if d_loss is not None:
            row["d"] = d_loss
        history.append(row)
    return g, history


def _const(fm: FeatureMap) -> FeatureMap:
    return FeatureMap(Tensor(fm.values.data.copy()), fm.level)


def stylize(x: VideoSequence, g: GeneratorParams, spec: EncoderSpec) -> VideoSequence:
    """Deterministic full-video pass through the generator, clamped to [0, 1]."""
    outs = g_forward(x, g, spec)
    return from_tensors(outs, fps=x.fps, id=f"{x.id}-stylized")
