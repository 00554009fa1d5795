"""Evolvement extraction and the evolve-sync loss.

An evolvement sample is the standardized absolute difference of encoded
features between two frames; the per-channel samples of a frame pair are
treated as draws from a distribution.  The evolve-sync loss compares source
and synthesized evolvements with a Gaussian-kernel MMD (biased squared
V-statistic), summed over frame pairs closer than an order bound and
weighted per encoder level.  AESL is the same quantity with the order bound
swept and the total divided by the video length; it doubles as the
temporal-smoothness metric reported by the CLI.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import tensor as T
from .encoders import EncoderSpec, FeatureMap, encode
from .tensor import ShapeError, Tensor, custom_op

__all__ = [
    "LEVELS",
    "SampleSet",
    "KernelSpec",
    "LossWeights",
    "standardize",
    "standardize_channels",
    "sample_channels",
    "evolvement",
    "median_bandwidth",
    "mmd2",
    "evolve_sync_loss",
    "evolvement_matrices",
    "aesl",
    "DEFAULT_AESL_ORDERS",
]

LEVELS = ("micro", "macro")
_LEVEL_TAP = {"micro": "micro", "macro": "macro"}
DEFAULT_AESL_ORDERS = (2, 4, 6, 8, 10, 12)


class SampleSet:
    """Equal-shape evolvement samples at one level, stored as an (n, d) matrix."""

    def __init__(self, matrix, level: str = "micro", spatial: tuple[int, int] | None = None):
        if not isinstance(matrix, Tensor):
            matrix = Tensor(np.asarray(matrix, dtype=np.float64))
        if matrix.ndim != 2:
            raise ShapeError(f"SampleSet: expected (n, d) matrix, got shape {matrix.shape}")
        if matrix.shape[0] < 1:
            raise ValueError("SampleSet: need at least one sample")
        self.matrix = matrix
        self.level = level
        self.spatial = spatial

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def samples(self) -> list[np.ndarray]:
        rows = self.matrix.data
        if self.spatial is None:
            return [rows[i].copy() for i in range(rows.shape[0])]
        return [rows[i].reshape(self.spatial).copy() for i in range(rows.shape[0])]


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian RBF kernel; bandwidth None selects the median heuristic."""

    bandwidth: float | None = None

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError(f"KernelSpec: bandwidth must be positive, got {self.bandwidth}")

    def resolve(self, a: "SampleSet", b: "SampleSet") -> float:
        if self.bandwidth is not None:
            return float(self.bandwidth)
        return median_bandwidth(a, b)


@dataclass(frozen=True)
class LossWeights:
    """Order bound and per-level weights of the evolve-sync loss, plus the
    smoothness-prior weight used by the synthesis and generator objectives."""

    delta: int = 3
    alpha_micro: float = 0.005
    alpha_macro: float = 100.0
    omega: float = 1e-5

    def __post_init__(self):
        if self.delta < 2:
            raise ValueError(f"LossWeights: delta must be >= 2, got {self.delta}")
        if min(self.alpha_micro, self.alpha_macro, self.omega) < 0:
            raise ValueError("LossWeights: weights must be non-negative")


# -- standardization -----------------------------------------------------------

def _standardize_node(x: Tensor, eps: float, per_channel: bool) -> Tensor:
    """(x - mean) / (std + eps), population std, over all elements or per leading channel."""
    axes = tuple(range(1, x.ndim)) if per_channel else tuple(range(x.ndim))
    eps = float(eps)

    def compute(data):
        mu = data.mean(axis=axes, keepdims=True)
        xc = data - mu
        sigma = np.sqrt((xc * xc).mean(axis=axes, keepdims=True))
        return xc, sigma, xc / (sigma + eps)

    xc, sigma, out = compute(x.data)
    n = int(np.prod([x.shape[a] for a in axes]))
    s = sigma + eps

    def backward(g):
        gm = g.mean(axis=axes, keepdims=True)
        dot = (g * xc).sum(axis=axes, keepdims=True)
        # zero the sigma-path term at sigma == 0 (constant input; same convention
        # as the sqrt subgradient)
        scale = np.zeros_like(sigma)
        np.divide(1.0, n * sigma * s * s, out=scale, where=sigma > 0)
        return ((g - gm) / s - xc * dot * scale,)

    return _wrap_standardize(x, compute, backward, out)


def _wrap_standardize(x, compute, backward, out):
    return custom_op("standardize", out, (x,), backward, lambda data: compute(data)[2])


def standardize(x, eps: float = 1e-8) -> Tensor:
    """Standardize one 2D matrix over all of its elements."""
    if not isinstance(x, Tensor):
        x = Tensor(np.asarray(x))
    if x.ndim != 2:
        raise ShapeError(f"standardize: expected a 2D matrix, got shape {x.shape}")
    return _standardize_node(x, eps, per_channel=False)


def standardize_channels(x: Tensor, eps: float = 1e-8) -> Tensor:
    """Standardize each leading-axis channel of (C, ...) independently."""
    if x.ndim < 2:
        raise ShapeError(f"standardize_channels: expected (C, ...) input, got shape {x.shape}")
    return _standardize_node(x, eps, per_channel=True)


# -- sampling -------------------------------------------------------------------

def sample_channels(fm: FeatureMap) -> SampleSet:
    """One sample per channel of a feature map, in channel order."""
    c, h, w = fm.values.shape
    matrix = T.reshape(fm.values, (c, h * w))
    return SampleSet(matrix, level=fm.level, spatial=(h, w))


def _sample_matrix(fa: Tensor, fb: Tensor, eps: float = 1e-8) -> Tensor:
    d = T.abs(T.subtract(fb, fa))
    z = standardize_channels(d, eps)
    c = z.shape[0]
    return T.reshape(z, (c, z.size // c))


def evolvement(frame_a: Tensor, frame_b: Tensor, level: str, spec: EncoderSpec,
               eps: float = 1e-8) -> SampleSet:
    """Per-channel standardized |encode(b) - encode(a)|; differentiable in both frames."""
    if level not in LEVELS:
        raise ValueError(f"evolvement: level must be one of {LEVELS}, got {level!r}")
    if not isinstance(frame_a, Tensor):
        frame_a = Tensor(np.asarray(frame_a))
    if not isinstance(frame_b, Tensor):
        frame_b = Tensor(np.asarray(frame_b))
    if frame_a.shape != frame_b.shape:
        raise ShapeError(f"evolvement: frame shapes {frame_a.shape} and {frame_b.shape} differ")
    fa = encode(frame_a, _LEVEL_TAP[level], spec)
    fb = encode(frame_b, _LEVEL_TAP[level], spec)
    matrix = _sample_matrix(fa.values, fb.values, eps)
    return SampleSet(matrix, level=level, spatial=(fa.height, fa.width))


# -- MMD ---------------------------------------------------------------------------

def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # broadcast form keeps D_ab the exact transpose of D_ba and gives exact
    # zeros for identical rows, which the identity/symmetry contracts rely on
    diff = a[:, None, :] - b[None, :, :]
    return (diff * diff).sum(axis=2)


def _pooled_sq_dists(da: np.ndarray, db: np.ndarray) -> np.ndarray:
    pooled = np.concatenate([da, db], axis=0)
    return _pairwise_sq_dists(pooled, pooled)


def _median_of_dists(d2: np.ndarray) -> float:
    iu = np.triu_indices(d2.shape[0], k=1)
    dists = np.sqrt(np.maximum(d2[iu], 0.0))
    nz = dists[dists > 0]
    if nz.size == 0:
        return 1.0
    return float(np.median(nz))


def median_bandwidth(a: SampleSet, b: SampleSet) -> float:
    """Median of the nonzero pairwise distances of the pooled samples; 1.0 fallback."""
    pooled = np.concatenate([a.matrix.data, b.matrix.data], axis=0)
    if pooled.shape[0] < 2:
        return 1.0
    return _median_of_dists(_pairwise_sq_dists(pooled, pooled))


def _mmd2_node(a: Tensor, b: Tensor, bandwidth: float | None) -> Tensor:
    """Fused V-statistic node; bandwidth None applies the median heuristic.

    The pooled distance matrix is computed once and sliced into the three
    kernel blocks, so the median shares the same arithmetic as the kernels.
    """
    n, m = a.shape[0], b.shape[0]

    def forward(da, db):
        d2 = _pooled_sq_dists(da, db)
        bw = _median_of_dists(d2) if bandwidth is None else float(bandwidth)
        k = np.exp(-d2 / (2.0 * bw * bw))
        kaa, kbb, kab = k[:n, :n], k[n:, n:], k[:n, n:]
        # the cross sum is evaluated in both orientations so that swapping the
        # argument order reproduces the exact same float
        cross = np.sum(kab) + np.sum(np.ascontiguousarray(kab.T))
        val = np.asarray(kaa.mean() + kbb.mean() - cross / (n * m), dtype=da.dtype)
        return val, (kaa, kbb, kab, bw)

    out, (kaa, kbb, kab, bw) = forward(a.data, b.data)

    def backward(g):
        go = float(g)
        ga = gb = None
        ibw2 = 1.0 / (bw * bw)
        if a.requires_grad:
            within = kaa @ a.data - kaa.sum(axis=1)[:, None] * a.data
            across = kab @ b.data - kab.sum(axis=1)[:, None] * a.data
            ga = go * ibw2 * (2.0 / (n * n) * within - 2.0 / (n * m) * across)
            ga = ga.astype(a.dtype, copy=False)
        if b.requires_grad:
            within = kbb @ b.data - kbb.sum(axis=1)[:, None] * b.data
            across = kab.T @ a.data - kab.sum(axis=0)[:, None] * b.data
            gb = go * ibw2 * (2.0 / (m * m) * within - 2.0 / (n * m) * across)
            gb = gb.astype(b.dtype, copy=False)
        return (ga, gb)

    return custom_op("mmd2", out, (a, b), backward, lambda da, db: forward(da, db)[0])


def mmd2(a: SampleSet, b: SampleSet, kernel: KernelSpec = KernelSpec()) -> Tensor:
    """Biased squared-MMD V-statistic between two sample sets (scalar tensor).

    Samples are flattened to vectors; the bandwidth (median heuristic by
    default) is treated as a constant with respect to gradients.
    """
    if a.matrix.shape[1] != b.matrix.shape[1]:
        raise ShapeError(
            f"mmd2: sample dimensions {a.matrix.shape[1]} and {b.matrix.shape[1]} differ")
    return _mmd2_node(a.matrix, b.matrix, kernel.bandwidth)


# -- the loss -------------------------------------------------------------------

def _frame_tensors(video) -> list[Tensor]:
    frames = getattr(video, "frames", video)
    out = []
    for f in frames:
        if isinstance(f, Tensor):
            out.append(f)
        else:
            arr = np.asarray(f)
            if arr.ndim != 3 or arr.shape[2] != 3:
                raise ShapeError(f"expected (H, W, 3) frame arrays, got shape {arr.shape}")
            out.append(Tensor(np.transpose(arr, (2, 0, 1)).astype(np.float32)))
    return out


def _pairs(n: int, delta: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, min(i + delta, n))]


def _level_weights(w: LossWeights) -> list[tuple[str, float]]:
    return [("micro", w.alpha_micro), ("macro", w.alpha_macro)]


def evolve_sync_loss(x, y, w: LossWeights, spec: EncoderSpec,
                     kernel: KernelSpec = KernelSpec(), *,
                     x_sets: dict | None = None,
                     y_macro: Sequence[Tensor] | None = None,
                     active_from: int = 0) -> Tensor:
    """Evolve-sync loss between a source and a synthesized video (scalar tensor).

    Sums alpha-weighted mmd2 terms over frame pairs (i, j) with i < j and
    j - i < delta, at the micro and macro levels; differentiable with respect
    to the synthesized frames.  `x_sets` may carry precomputed source-side
    sample matrices keyed by (i, j, level); `y_macro` precomputed macro
    feature tensors for the synthesized frames (training loops reuse both).
    With `active_from` set, pairs lying entirely inside the first
    `active_from` frames are skipped (segmented optimization charges each
    pair to exactly one segment, so pairs among anchored frames belong to
    the segment that produced them).
    """
    xf = _frame_tensors(x)
    yf = _frame_tensors(y)
    if len(xf) != len(yf):
        raise ValueError(f"evolve_sync_loss: videos have {len(xf)} and {len(yf)} frames")
    if len(xf) < 2:
        raise ValueError("evolve_sync_loss: need at least 2 frames")
    for xi, yi in zip(xf, yf):
        if xi.shape != yi.shape:
            raise ShapeError(f"evolve_sync_loss: frame shapes {xi.shape} and {yi.shape} differ")

    x_macro_cache: dict[int, Tensor] = {}
    y_macro_cache: dict[int, Tensor] = {}

    def macro_of(frames, cache, provided, i):
        if provided is not None and provided[i] is not None:
            fm = provided[i]
            return fm.values if isinstance(fm, FeatureMap) else fm
        if i not in cache:
            cache[i] = encode(frames[i], "macro", spec).values
        return cache[i]

    def sample_set(frames, cache, provided, i, j, level):
        if level == "micro":
            return SampleSet(_sample_matrix(frames[i], frames[j]), level)
        a = macro_of(frames, cache, provided, i)
        b = macro_of(frames, cache, provided, j)
        return SampleSet(_sample_matrix(a, b), level)

    total: Tensor | None = None
    for i, j in _pairs(len(xf), w.delta):
        if j < active_from:
            continue
        for level, alpha in _level_weights(w):
            if alpha == 0.0:
                continue
            if x_sets is not None and (i, j, level) in x_sets:
                sx = SampleSet(Tensor(x_sets[(i, j, level)]), level)
            else:
                sx = sample_set(xf, x_macro_cache, None, i, j, level)
            sy = sample_set(yf, y_macro_cache, y_macro, i, j, level)
            term = T.scalar_multiply(mmd2(sx, sy, kernel), alpha)
            total = term if total is None else T.add(total, term)
    if total is None:
        # both level weights were zero; the loss is identically zero
        return Tensor(np.zeros((), dtype=yf[0].dtype))
    return total


def evolvement_matrices(frames, delta: int, spec: EncoderSpec,
                        w: LossWeights) -> dict[tuple[int, int, str], np.ndarray]:
    """Constant evolvement sample matrices for every in-range pair of a fixed video."""
    ft = [f.detach() if isinstance(f, Tensor) else f for f in _frame_tensors(frames)]
    macro = {}
    out: dict[tuple[int, int, str], np.ndarray] = {}
    for i, j in _pairs(len(ft), delta):
        for level, alpha in _level_weights(w):
            if alpha == 0.0:
                continue
            if level == "micro":
                out[(i, j, level)] = _sample_matrix(ft[i], ft[j]).data
            else:
                for k in (i, j):
                    if k not in macro:
                        macro[k] = encode(ft[k], "macro", spec).values
                out[(i, j, level)] = _sample_matrix(macro[i], macro[j]).data
    return out


def aesl(x, y, order: int, w: LossWeights, spec: EncoderSpec,
         kernel: KernelSpec = KernelSpec()) -> float:
    """Averaging evolve-sync loss: the loss at order bound `order`, divided by
    the video length.  Nondecreasing in `order` (larger orders add terms)."""
    if order < 2:
        raise ValueError(f"aesl: order must be >= 2, got {order}")
    loss = evolve_sync_loss(x, y, replace(w, delta=order), spec, kernel)
    n = len(getattr(y, "frames", y))
    return loss.item() / n
