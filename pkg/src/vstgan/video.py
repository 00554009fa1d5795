"""Frame-sequence containers, PNG directory I/O, and synthetic fixtures.

Videos are directories of ``frame_00000.png`` files (8-bit RGB, zero-based,
contiguous).  In memory a frame is a float32 (H, W, 3) array in [0, 1];
compute code converts to channel-first tensors at the boundary.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .tensor import Tensor

__all__ = [
    "FrameSequenceError",
    "VideoSequence",
    "RealSampleSet",
    "load_frames",
    "save_frames",
    "load_real_samples",
    "save_real_samples",
    "load_style",
    "save_style",
    "make_fixture",
    "add_noise",
    "to_tensors",
    "from_tensors",
    "frame_to_tensor",
]

_FRAME_RE = re.compile(r"^frame_(\d{5})\.png$")

FIXTURE_KINDS = ("translating-square", "translating-texture", "static-plus-noise")


class FrameSequenceError(ValueError):
    """A frame directory or sequence violates the naming or shape contract."""


def _check_frames(frames: list[np.ndarray]) -> None:
    if not frames:
        raise FrameSequenceError("video must contain at least one frame")
    shape = frames[0].shape
    for i, f in enumerate(frames):
        if f.ndim != 3 or f.shape[2] != 3:
            raise FrameSequenceError(f"frame {i} has shape {f.shape}, expected (H, W, 3)")
        if f.shape != shape:
            raise FrameSequenceError(f"frame {i} has shape {f.shape}, others have {shape}")
        if f.min() < 0.0 or f.max() > 1.0:
            raise FrameSequenceError(f"frame {i} has values outside [0, 1]")


@dataclass
class VideoSequence:
    """Ordered float frames in [0, 1]; fps is informational metadata."""

    frames: list[np.ndarray]
    fps: float = 23.0
    id: str = "video"

    def __post_init__(self):
        self.frames = [np.asarray(f, dtype=np.float32) for f in self.frames]
        _check_frames(self.frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.frames[0].shape


@dataclass
class RealSampleSet:
    """Synthesized real samples, one per even-indexed source frame."""

    indices: list[int]
    frames: list[np.ndarray]
    stats: list[dict] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if len(self.indices) != len(self.frames):
            raise FrameSequenceError(
                f"{len(self.indices)} indices for {len(self.frames)} frames")
        expected = list(range(0, 2 * len(self.indices), 2))
        if self.indices != expected:
            raise FrameSequenceError(
                f"real-sample indices must be 0, 2, 4, ...; got {self.indices}")
        self.frames = [np.asarray(f, dtype=np.float32) for f in self.frames]
        _check_frames(self.frames)

    def frame_for(self, source_index: int) -> np.ndarray:
        return self.frames[source_index // 2]


# -- tensor boundary ------------------------------------------------------------

def frame_to_tensor(frame: np.ndarray, requires_grad: bool = False) -> Tensor:
    return Tensor(np.transpose(frame, (2, 0, 1)).astype(np.float32), requires_grad=requires_grad)


def tensor_to_frame(t: Tensor) -> np.ndarray:
    return np.transpose(np.clip(t.data, 0.0, 1.0), (1, 2, 0)).astype(np.float32)


def to_tensors(video: VideoSequence) -> list[Tensor]:
    return [frame_to_tensor(f) for f in video.frames]


def from_tensors(tensors: list[Tensor], fps: float = 23.0, id: str = "video") -> VideoSequence:
    return VideoSequence([tensor_to_frame(t) for t in tensors], fps=fps, id=id)


# -- PNG directories --------------------------------------------------------------

def _decode_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def _encode_png(frame: np.ndarray, path: Path) -> None:
    data = np.clip(frame, 0.0, 1.0) * 255.0
    quantized = np.floor(data + 0.5).astype(np.uint8)  # round half up
    Image.fromarray(quantized, mode="RGB").save(path)


def _scan_dir(directory) -> dict[int, Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FrameSequenceError(f"not a directory: {directory}")
    found = {}
    for p in sorted(directory.iterdir()):
        m = _FRAME_RE.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise FrameSequenceError(f"no frame_XXXXX.png files in {directory}")
    return found


def load_frames(directory) -> VideoSequence:
    """Load a contiguous zero-based frame directory; gaps are rejected."""
    found = _scan_dir(directory)
    for i in range(len(found)):
        if i not in found:
            raise FrameSequenceError(f"missing frame {i} in {directory}")
    frames = [_decode_png(found[i]) for i in range(len(found))]
    try:
        _check_frames(frames)
    except FrameSequenceError as e:
        raise FrameSequenceError(f"{directory}: {e}") from e
    return VideoSequence(frames, id=Path(directory).name)


def save_frames(video: VideoSequence, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(video.frames):
        _encode_png(frame, directory / f"frame_{i:05d}.png")


def load_real_samples(directory) -> RealSampleSet:
    """Load a synthesized-sample directory named by even source indices."""
    found = _scan_dir(directory)
    indices = sorted(found)
    expected = list(range(0, 2 * len(indices), 2))
    if indices != expected:
        raise FrameSequenceError(
            f"{directory}: expected frames at even indices {expected}, found {indices}")
    return RealSampleSet(indices, [_decode_png(found[i]) for i in indices])


def save_real_samples(samples: RealSampleSet, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for idx, frame in zip(samples.indices, samples.frames):
        _encode_png(frame, directory / f"frame_{idx:05d}.png")


def load_style(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FrameSequenceError(f"style image not found: {path}")
    return _decode_png(path)


def save_style(frame: np.ndarray, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _encode_png(frame, path)


# -- synthetic fixtures ------------------------------------------------------------

def _smooth_noise(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Tileable low-frequency texture so circular shifts stay seamless."""
    coarse = rng.random((3, max(h // 4, 2), max(w // 4, 2))).astype(np.float32)
    out = np.empty((h, w, 3), dtype=np.float32)
    ch, cw = coarse.shape[1:]
    ys = (np.arange(h) * ch / h)
    xs = (np.arange(w) * cw / w)
    y0 = ys.astype(int) % ch
    x0 = xs.astype(int) % cw
    y1 = (y0 + 1) % ch
    x1 = (x0 + 1) % cw
    fy = (ys - np.floor(ys))[:, None]
    fx = (xs - np.floor(xs))[None, :]
    for c in range(3):
        g = coarse[c]
        out[:, :, c] = ((1 - fy) * (1 - fx) * g[np.ix_(y0, x0)]
                        + (1 - fy) * fx * g[np.ix_(y0, x1)]
                        + fy * (1 - fx) * g[np.ix_(y1, x0)]
                        + fy * fx * g[np.ix_(y1, x1)])
    return out


def _base_pattern(rng: np.random.Generator, size: int) -> np.ndarray:
    base = 0.15 + 0.7 * _smooth_noise(rng, size, size)
    side = max(size // 3, 2)
    top = int(rng.integers(0, size - side))
    left = int(rng.integers(0, size - side))
    lo, hi = rng.random(3).astype(np.float32) * 0.3, 0.7 + rng.random(3).astype(np.float32) * 0.3
    # quartered square with strong contrast so the moving object carries texture
    half = side // 2
    base[top:top + side, left:left + side] = lo
    base[top:top + half, left:left + half] = hi
    base[top + half:top + side, left + half:left + side] = hi
    return np.clip(base, 0.0, 1.0)


def make_fixture(kind: str, seed: int, frames: int, size: int,
                 noise_sigma: float = 0.1) -> VideoSequence:
    """Deterministic synthetic videos for tests and desk-scale runs.

    translating-square / translating-texture: frame t is frame 0 circularly
    shifted by t pixels (1 px/frame with wraparound).  static-plus-noise:
    a fixed pattern plus seeded iid Gaussian noise per frame.
    """
    if kind not in FIXTURE_KINDS:
        raise ValueError(f"unknown fixture kind {kind!r}; choose from {FIXTURE_KINDS}")
    if frames < 4:
        raise ValueError(f"fixtures need at least 4 frames, got {frames}")
    rng = np.random.default_rng(seed)
    out = []
    if kind == "translating-square":
        base = _base_pattern(rng, size)
        out = [np.roll(base, t, axis=1) for t in range(frames)]
    elif kind == "translating-texture":
        base = np.clip(_smooth_noise(rng, size, size), 0.0, 1.0)
        out = [np.roll(base, t, axis=1) for t in range(frames)]
    else:
        base = _base_pattern(rng, size)
        for _ in range(frames):
            noisy = base + rng.normal(0.0, noise_sigma, base.shape).astype(np.float32)
            out.append(np.clip(noisy, 0.0, 1.0))
    return VideoSequence(out, id=f"{kind}-s{seed}")


def add_noise(video: VideoSequence, sigma: float, seed: int) -> VideoSequence:
    rng = np.random.default_rng(seed)
    frames = [np.clip(f + rng.normal(0.0, sigma, f.shape).astype(np.float32), 0.0, 1.0)
              for f in video.frames]
    return VideoSequence(frames, fps=video.fps, id=f"{video.id}+noise")
