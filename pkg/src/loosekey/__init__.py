"""Motion in-betweening under loose keyframe timing.

A dual-head conditional diffusion model predicts a global time warp plus
per-frame pose residuals on top of the linearly infilled keyframe signal,
together with the dataset generator, baselines and metrics around it.
"""

from .datagen import (
    DatagenConfig,
    TrainingPair,
    build_dataset,
    find_extrema,
    load_dataset,
    make_pair,
    slice_clips,
    synth_source_motions,
)
from .denoiser import Denoiser, NetConfig, load_checkpoint, param_count, save_checkpoint
from .diffusion import (
    NoiseSchedule,
    SamplerConfig,
    cosine_schedule,
    forward_noise,
    linear_schedule,
    make_schedule,
    sample,
    sample_batch,
    training_step,
)
from .longform import SpliceLayout, constrained_sample, splice
from .metrics import (
    EvalReport,
    diversity,
    evaluate,
    jitter,
    joint_positions_gl,
    kpe,
    l2_family,
)
from .motion import Motion, Pose, PoseLayout, read_motion, refresh_positions, write_motion
from .observation import (
    KeyframeSet,
    ObservationSignal,
    infill_linear,
    place_on_timeline,
)
from .skeleton import (
    Skeleton,
    default_skeleton,
    forward_kinematics,
    rot6d_to_matrix,
    smpl_like_skeleton,
)
from .training import TrainConfig, build_model, eval_loss, train
from .warp import WarpFunction, apply_warp, identity_warp, warp_from_slopes, warp_jacobian_check

__version__ = "0.1.0"
