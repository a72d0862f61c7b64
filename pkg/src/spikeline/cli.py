"""Command-line interface: simulate, reconstruct, ddpm-demo, synth, bench.

Conventions: human-readable progress goes to stderr, machine-readable
output (the bench JSON report) to stdout.  Exit codes: 0 success, 2 for
usage/config problems (missing input, bad flag values, bad checkpoint),
3 for malformed data files.  SPIKELINE_SEED provides the default seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset_synth import SynthConfig, current_for_value, synth_dataset
from .diffusion import (BlockParams, BlockShape, CheckpointError,
                        OracleDenoiser, ToyCondDenoiser, image_to_latent,
                        load_checkpoint, make_schedule, sample)
from .isi_etfi import apply_gain, etfi, isi_search
from .metrics import psnr, ssim
from .recon_classic import tfi, tfp
from .spike_core import (LuminanceVideo, NoiseModel, SensorConfig,
                         firing_rate_map, simulate_stream)
from .stream_io import (GrayImage, PgmFormatError, SpkFormatError,
                        decode_stream, encode_stream, read_pgm, write_pgm)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3

BENCH_SCHEMA_VERSION = 1


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    raw = os.environ.get("SPIKELINE_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"SPIKELINE_SEED must be an integer, got {raw!r}") from None


def _require_input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input not found: {path}")
    return p


def _noise_from_args(args, seed: int) -> NoiseModel:
    return NoiseModel(
        shot_noise_enabled=args.shot_noise,
        photons_per_unit=args.photons_per_unit,
        dark_current=args.dark_current,
        hot_pixel_fraction=args.hot_fraction,
        hot_pixel_current=args.hot_current,
        seed=seed,
    )


def _add_sensor_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, default=2.0,
                   help="accumulation threshold (default 2.0)")
    p.add_argument("--period", type=float, default=5e-5,
                   help="sampling period in seconds (default 5e-5)")
    p.add_argument("--shot-noise", action="store_true",
                   help="enable Poisson shot noise")
    p.add_argument("--photons-per-unit", type=float, default=1000.0)
    p.add_argument("--dark-current", type=float, default=0.0)
    p.add_argument("--hot-fraction", type=float, default=0.0)
    p.add_argument("--hot-current", type=float, default=0.0)


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    if args.frames < 1:
        raise ValueError(f"--frames must be >= 1, got {args.frames}")
    path = _require_input(args.input)
    image = read_pgm(path.read_bytes())
    config = SensorConfig(width=image.width, height=image.height,
                          threshold=args.threshold, sample_period=args.period,
                          noise=_noise_from_args(args, seed))
    current = current_for_value(image.pixels, config)
    video = LuminanceVideo.from_image(current, frames=args.frames)
    stream = simulate_stream(video, config, workers=args.workers)
    Path(args.out).write_bytes(encode_stream(stream))
    rate = float(firing_rate_map(stream).mean())
    print(f"frames={stream.frame_count} mean_rate={rate:.6f}", file=sys.stderr)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    path = _require_input(args.input)
    stream = decode_stream(path.read_bytes())
    k = args.k if args.k is not None else stream.start_index + stream.frame_count // 2

    if args.method == "tfp":
        image = tfp(stream, k, args.window,
                    gain=args.gain if args.gain is not None else 255.0)
    elif args.method == "tfi":
        interval_map = isi_search(stream, k)
        image = tfi(interval_map, stream.config, gain=args.gain)
    else:
        interval_map = isi_search(stream, k)
        enhanced = etfi(interval_map)
        if args.auto_gain:
            enhanced = apply_gain(enhanced, "auto")
        elif args.gain is not None:
            enhanced = apply_gain(enhanced, args.gain)
        print(f"overexposure_ratio={enhanced.overexposure_ratio:.6f}", file=sys.stderr)
        image = enhanced.image

    Path(args.out).write_bytes(write_pgm(image))
    return EXIT_OK


def cmd_ddpm_demo(args) -> int:
    seed = _resolve_seed(args)
    path = _require_input(args.cond)
    cond = read_pgm(path.read_bytes())
    sched = make_schedule(args.steps, variance_mode=args.variance_mode)
    print(f"steps={args.steps} cfg={args.cfg_scale:g}", file=sys.stderr)

    latent_shape = BlockShape(latent_h=cond.height, latent_w=cond.width)
    if args.denoiser == "checkpoint":
        if not args.checkpoint:
            raise ValueError("--denoiser checkpoint requires --checkpoint PATH")
        params = load_checkpoint(args.checkpoint)
        if (params.shape.latent_h, params.shape.latent_w) != (cond.height, cond.width):
            raise ValueError(
                f"checkpoint latent {params.shape.latent_w}x{params.shape.latent_h} "
                f"does not match condition {cond.width}x{cond.height}")
        denoiser = ToyCondDenoiser(params)
    else:
        params = BlockParams.init(latent_shape, seed=seed)
        denoiser = OracleDenoiser(image_to_latent(cond), sched)

    def trace(t, z):
        print(f"t={t:4d} |z|={float(np.sqrt(np.mean(z * z))):.4f}", file=sys.stderr)

    image = sample(denoiser, cond, sched, cfg_scale=args.cfg_scale,
                   seed=seed, params=params, trace=trace)
    Path(args.out).write_bytes(write_pgm(image))
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = _resolve_seed(args)
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise FileNotFoundError(f"input not found: {args.corpus}")
    sensor = SensorConfig(width=args.crop_size, height=args.crop_size,
                          threshold=args.threshold, sample_period=args.period,
                          noise=_noise_from_args(args, seed))
    cfg = SynthConfig(crop_size=args.crop_size, degrade_factor=args.degrade_factor,
                      stream_frames=args.frames, sensor=sensor, seed=seed)
    manifest = synth_dataset(corpus, args.out, cfg, workers=args.workers)
    print(f"manifest={manifest.path} samples={len(manifest.entries)}", file=sys.stderr)
    return EXIT_OK


def _bench_scene(side: int, config: SensorConfig) -> LuminanceVideo:
    # smooth luminance ramp covering firing rates ~[0.02, 0.48]
    ramp = np.linspace(0.02, 0.48, side)
    rate = 0.5 * (ramp[:, None] + ramp[None, :])
    current = rate * config.threshold / config.sample_period
    return LuminanceVideo.from_image(current, frames=1)


def cmd_bench(args) -> int:
    seed = _resolve_seed(args)
    if args.frames < 1:
        raise ValueError(f"--frames must be >= 1, got {args.frames}")
    if args.resolution < 1:
        raise ValueError(f"--resolution must be >= 1, got {args.resolution}")
    if args.workers < 1:
        raise ValueError(f"--workers must be >= 1, got {args.workers}")

    side = args.resolution
    noise = NoiseModel(shot_noise_enabled=args.shot_noise, seed=seed)
    config = SensorConfig(width=side, height=side, noise=noise)
    scene = _bench_scene(side, config)
    k = args.frames // 2
    pixel_frames = side * side * args.frames

    results = {}
    digests = {}
    for label, workers in (("single", 1), ("multi", args.workers)):
        t0 = time.perf_counter()
        stream = simulate_stream(scene, config, steps_per_frame=args.frames,
                                 workers=workers)
        t_sim = time.perf_counter() - t0
        t0 = time.perf_counter()
        interval_map = isi_search(stream, k, workers=workers)
        t_isi = time.perf_counter() - t0
        results[label] = {
            "simulate_seconds": t_sim,
            "simulate_pixel_frames_per_second": pixel_frames / t_sim,
            "isi_search_seconds": t_isi,
            "isi_search_pixel_frames_per_second": pixel_frames / t_isi,
        }
        digests[label] = {
            "stream": hashlib.sha256(stream.bits.tobytes()).hexdigest(),
            "isi": hashlib.sha256(interval_map.isi.tobytes()
                                  + interval_map.valid.tobytes()).hexdigest(),
        }
        print(f"{label}: simulate {t_sim:.3f}s, isi_search {t_isi:.3f}s "
              f"(workers={workers})", file=sys.stderr)

    report = {
        "schema": BENCH_SCHEMA_VERSION,
        "resolution": [side, side],
        "frames": args.frames,
        "workers": args.workers,
        "shot_noise": bool(args.shot_noise),
        "seed": seed,
        "single": results["single"],
        "multi": results["multi"],
        "digests": digests,
        "bit_identical": digests["single"] == digests["multi"],
    }
    json.dump(report, sys.stdout, indent=2)
    print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikeline",
        description="Spike-camera stream simulation, reconstruction and "
                    "toy conditional diffusion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="film a PGM image into a .spk stream")
    p.add_argument("input", help="input image (.pgm)")
    p.add_argument("--out", required=True, help="output stream (.spk)")
    p.add_argument("--frames", type=int, default=400)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    _add_sensor_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a .spk stream")
    p.add_argument("input", help="input stream (.spk)")
    p.add_argument("--method", choices=("tfi", "tfp", "etfi"), default="etfi")
    p.add_argument("--k", type=int, default=None,
                   help="reference frame (default: stream center)")
    p.add_argument("--window", type=int, default=10,
                   help="tfp half-window in frames")
    p.add_argument("--gain", type=float, default=None)
    p.add_argument("--auto-gain", action="store_true",
                   help="etfi only: map the 99th-percentile value to 255")
    p.add_argument("--out", required=True, help="output image (.pgm)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("ddpm-demo", help="run the conditional sampling loop")
    p.add_argument("--cond", required=True, help="condition image (.pgm)")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--cfg-scale", type=float, default=2.0)
    p.add_argument("--denoiser", choices=("oracle", "checkpoint"), default="oracle")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--variance-mode", choices=("beta", "zero"), default="beta")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output image (.pgm)")
    p.set_defaults(func=cmd_ddpm_demo)

    p = sub.add_parser("synth", help="synthesize training pairs from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--crop-size", type=int, default=512)
    p.add_argument("--degrade-factor", type=float, default=2.0)
    p.add_argument("--frames", type=int, default=400)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    _add_sensor_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="simulate/isi_search throughput report")
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--frames", type=int, default=2000)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--shot-noise", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (SpkFormatError, PgmFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())
