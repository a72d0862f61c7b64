"""Toy conditional diffusion: schedule algebra, blocks, sampling, training."""

from .blocks import (BlockParams, BlockShape, ConditionFeatures, OracleDenoiser,
                     ToyCondDenoiser, eca_attention, encode_condition, fuse,
                     parameter_specs, zero_features)
from .checkpoint import (CheckpointError, load_checkpoint, save_checkpoint)
from .nn import Adam, timestep_embedding
from .sampler import image_to_latent, latent_to_image, sample
from .schedule import (NoiseSchedule, cfg_combine, forward_diffuse,
                       make_schedule, reverse_step, training_loss)
from .training import TrainingTrace, toy_training_run, training_step

__all__ = [
    "Adam", "BlockParams", "BlockShape", "CheckpointError",
    "ConditionFeatures", "NoiseSchedule", "OracleDenoiser", "ToyCondDenoiser",
    "TrainingTrace", "cfg_combine", "eca_attention", "encode_condition",
    "forward_diffuse", "fuse", "image_to_latent", "latent_to_image",
    "load_checkpoint", "make_schedule", "parameter_specs", "reverse_step",
    "sample", "save_checkpoint", "timestep_embedding", "toy_training_run",
    "training_loss", "training_step", "zero_features",
]
