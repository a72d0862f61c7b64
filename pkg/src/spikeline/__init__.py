"""Spike-camera stream toolkit.

Simulation of integrate-and-fire spike streams under low-light noise,
interval-based reconstructions (TFI / TFP / enhanced intensity), a
bit-exact stream codec, training-pair synthesis, and a from-scratch toy
conditional diffusion stack (schedule, CFG, zero-init condition blocks,
manual gradients).
"""

from . import diffusion
from .diffusion import (Adam, BlockParams, BlockShape, CheckpointError,
                        ConditionFeatures, NoiseSchedule, OracleDenoiser,
                        ToyCondDenoiser, TrainingTrace, cfg_combine,
                        eca_attention, encode_condition, forward_diffuse, fuse,
                        image_to_latent, latent_to_image, load_checkpoint,
                        make_schedule, parameter_specs, reverse_step, sample,
                        save_checkpoint, timestep_embedding, toy_training_run,
                        training_loss, training_step, zero_features)
from .dataset_synth import (ManifestEntry, SampleManifest, SynthConfig,
                            bilinear_resize, current_for_value, degrade_image,
                            image_to_stream, synth_dataset, synth_sample)
from .isi_etfi import EtfiImage, IsiMap, apply_gain, etfi, isi_search
from .metrics import overexposure_ratio, psnr, ssim
from .recon_classic import tfi, tfi_current, tfp
from .spike_core import (LuminanceVideo, NoiseModel, PixelAccumulator,
                         SensorConfig, SpikeStream, effective_current,
                         firing_rate_map, hot_pixel_mask, shot_noise_rng,
                         simulate_pixel, simulate_stream, slice_window)
from .stream_io import (GrayImage, PgmFormatError, SpkBadMagic,
                        SpkDimensionError, SpkFileHeader, SpkFormatError,
                        SpkTruncated, bytes_per_row, decode_stream, encode_stream,
                        quantize_u8, read_pgm, write_pgm)

__version__ = "0.1.0"

__all__ = [
    "Adam", "BlockParams", "BlockShape", "CheckpointError",
    "ConditionFeatures", "EtfiImage", "GrayImage", "IsiMap",
    "LuminanceVideo", "ManifestEntry", "NoiseModel", "NoiseSchedule",
    "OracleDenoiser", "PgmFormatError", "PixelAccumulator",
    "SampleManifest", "SensorConfig", "SpikeStream", "SpkBadMagic",
    "SpkDimensionError", "SpkFileHeader", "SpkFormatError", "SpkTruncated",
    "SynthConfig", "ToyCondDenoiser", "TrainingTrace",
    "apply_gain", "bilinear_resize", "bytes_per_row", "cfg_combine",
    "current_for_value", "decode_stream", "degrade_image", "diffusion",
    "eca_attention", "effective_current", "encode_condition",
    "encode_stream", "etfi", "firing_rate_map", "forward_diffuse", "fuse",
    "hot_pixel_mask", "image_to_latent", "image_to_stream", "isi_search",
    "latent_to_image", "load_checkpoint", "make_schedule",
    "overexposure_ratio", "parameter_specs", "psnr", "quantize_u8",
    "read_pgm", "reverse_step", "sample", "save_checkpoint",
    "shot_noise_rng", "simulate_pixel", "simulate_stream", "slice_window",
    "ssim", "synth_dataset", "synth_sample", "tfi", "tfi_current",
    "timestep_embedding", "tfp", "toy_training_run", "training_loss",
    "training_step", "write_pgm", "zero_features", "__version__",
]
