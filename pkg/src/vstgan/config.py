"""Training configuration and the flat `key = value` config-file format.

Files use `[section]` headers, UTF-8 text, and `#` comments.  Unknown
sections or keys are errors so hyperparameter typos fail loudly.  Flags
passed on the command line override file values, which override defaults.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace

from .evolvesync import KernelSpec, LossWeights

__all__ = ["ConfigError", "TrainConfig", "parse_config", "parse_config_text", "config_text", "config_dict"]


class ConfigError(ValueError):
    """Malformed config file or unknown section/key."""


@dataclass(frozen=True)
class TrainConfig:
    """Everything both training phases need; defaults follow the recipe."""

    seed: int = 0
    encoder_seed: int = 7
    weights: LossWeights = field(default_factory=LossWeights)
    bandwidth: float | None = None  # None -> median heuristic
    lr: float = 0.02
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    synth_iterations: int = 3000
    segment_size: int = 3
    anchor_frames: int = 2
    synth_d_ratio: int = 25
    gan_iterations: int = 20000
    batch: int = 3
    recurrent: bool = True
    gan_d_ratio: int = 10

    def __post_init__(self):
        if self.synth_iterations < 0 or self.gan_iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.batch < 2:
            raise ConfigError(f"batch (window size) must be >= 2, got {self.batch}")
        if self.segment_size < 1:
            raise ConfigError(f"segment_size must be >= 1, got {self.segment_size}")
        if not 0 <= self.anchor_frames <= 2:
            raise ConfigError(f"anchor_frames must be 0..2, got {self.anchor_frames}")
        if min(self.synth_d_ratio, self.gan_d_ratio) < 1:
            raise ConfigError("d_ratio values must be >= 1")

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.bandwidth)


# section -> key -> (parser, attribute path)
_SCHEMA = {
    "run": {"seed": ("int", "seed")},
    "encoder": {"seed": ("int", "encoder_seed")},
    "loss": {
        "delta": ("int", "weights.delta"),
        "alpha_micro": ("float", "weights.alpha_micro"),
        "alpha_macro": ("float", "weights.alpha_macro"),
        "omega": ("float", "weights.omega"),
    },
    "kernel": {"bandwidth": ("bandwidth", "bandwidth")},
    "adam": {
        "lr": ("float", "lr"),
        "beta1": ("float", "beta1"),
        "beta2": ("float", "beta2"),
        "eps": ("float", "eps"),
    },
    "synthesis": {
        "iterations": ("int", "synth_iterations"),
        "segment_size": ("int", "segment_size"),
        "anchor_frames": ("int", "anchor_frames"),
        "d_ratio": ("int", "synth_d_ratio"),
    },
    "gan": {
        "iterations": ("int", "gan_iterations"),
        "batch": ("int", "batch"),
        "recurrent": ("bool", "recurrent"),
        "d_ratio": ("int", "gan_d_ratio"),
    },
}


def _parse_value(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind == "bandwidth":
            return None if raw.lower() == "median" else float(raw)
    except ValueError as e:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from e
    raise AssertionError(kind)


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    cp = configparser.ConfigParser(comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e

    cfg_kwargs: dict = {}
    weights_kwargs: dict = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in cp[section].items():
            if key not in _SCHEMA[section]:
                known = ", ".join(sorted(_SCHEMA[section]))
                raise ConfigError(f"unknown key {key!r} in [{section}] (known: {known})")
            kind, attr = _SCHEMA[section][key]
            value = _parse_value(kind, raw, f"[{section}] {key}")
            if attr.startswith("weights."):
                weights_kwargs[attr.split(".", 1)[1]] = value
            else:
                cfg_kwargs[attr] = value

    base = base if base is not None else TrainConfig()
    weights = replace(base.weights, **weights_kwargs) if weights_kwargs else base.weights
    return replace(base, weights=weights, **cfg_kwargs)


def parse_config(path, base: TrainConfig | None = None) -> TrainConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config_text(text, base)


def config_text(cfg: TrainConfig) -> str:
    """Canonical rendering; parse_config_text(config_text(c)) == c."""
    bw = "median" if cfg.bandwidth is None else repr(cfg.bandwidth)
    out = io.StringIO()
    out.write("[run]\n")
    out.write(f"seed = {cfg.seed}\n")
    out.write("\n[encoder]\n")
    out.write(f"seed = {cfg.encoder_seed}\n")
    out.write("\n[loss]\n")
    out.write(f"delta = {cfg.weights.delta}\n")
    out.write(f"alpha_micro = {cfg.weights.alpha_micro!r}\n")
    out.write(f"alpha_macro = {cfg.weights.alpha_macro!r}\n")
    out.write(f"omega = {cfg.weights.omega!r}\n")
    out.write("\n[kernel]\n")
    out.write(f"bandwidth = {bw}\n")
    out.write("\n[adam]\n")
    out.write(f"lr = {cfg.lr!r}\n")
    out.write(f"beta1 = {cfg.beta1!r}\n")
    out.write(f"beta2 = {cfg.beta2!r}\n")
    out.write(f"eps = {cfg.eps!r}\n")
    out.write("\n[synthesis]\n")
    out.write(f"iterations = {cfg.synth_iterations}\n")
    out.write(f"segment_size = {cfg.segment_size}\n")
    out.write(f"anchor_frames = {cfg.anchor_frames}\n")
    out.write(f"d_ratio = {cfg.synth_d_ratio}\n")
    out.write("\n[gan]\n")
    out.write(f"iterations = {cfg.gan_iterations}\n")
    out.write(f"batch = {cfg.batch}\n")
    out.write(f"recurrent = {'true' if cfg.recurrent else 'false'}\n")
    out.write(f"d_ratio = {cfg.gan_d_ratio}\n")
    return out.getvalue()


def config_dict(cfg: TrainConfig) -> dict:
    """Flat json-friendly view used for run logging."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, LossWeights):
            out.update({f"loss.{k}": getattr(v, k) for k in
                        ("delta", "alpha_micro", "alpha_macro", "omega")})
        else:
            out[f.name] = v
    return out
