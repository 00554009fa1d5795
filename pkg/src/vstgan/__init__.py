"""Video style transfer with an evolve-sync temporal loss, at desk scale.

A self-contained reverse-mode autodiff tensor core drives three stages:
iterative deconvolution of real samples on every other frame, adversarial
generator training against those unpaired samples, and full-video
stylization.  The evolve-sync loss (Gaussian-kernel MMD between
standardized inter-frame feature differences) preserves temporal
smoothness, and its length-normalized form (AESL) doubles as the
evaluation metric.
"""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, TrainConfig, config_text, parse_config, parse_config_text
from .encoders import EncoderSpec, FeatureMap, UnknownTapError, build_encoder, encode, encode_from
from .evolvesync import (
    DEFAULT_AESL_ORDERS,
    KernelSpec,
    LossWeights,
    SampleSet,
    aesl,
    evolve_sync_loss,
    evolvement,
    median_bandwidth,
    mmd2,
    sample_channels,
    standardize,
)
from .generator import (
    AlignmentError,
    GeneratorError,
    GeneratorParams,
    TrainingDiverged,
    g_forward,
    gan_objective,
    stylize,
    train_gan,
)
from .gradcheck import GradCheckResult, grad_check
from .mdan import (
    FAKE,
    REAL,
    DiscriminatorParams,
    SynthesisError,
    WrongTapError,
    content_loss,
    d_score,
    d_update,
    style_loss,
    synthesize_real_samples,
    tv_prior,
)
from .optim import Adam
from .tensor import Graph, NonFiniteError, ShapeError, Tensor, gradients
from .video import (
    FrameSequenceError,
    RealSampleSet,
    VideoSequence,
    add_noise,
    load_frames,
    load_real_samples,
    load_style,
    make_fixture,
    save_frames,
    save_real_samples,
    save_style,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
