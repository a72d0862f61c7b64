#!/usr/bin/env python3
"""Train the toy conditional denoiser on one synthesized pair.

Synthesizes a single (enhanced image, ground truth) pair from a dim
generated scene, fits the denoiser at a fixed noise level, saves a
checkpoint usable by `spikeline ddpm-demo --denoiser checkpoint`, and
reports the loss trajectory.  This is a plumbing exercise at toy scale,
not a recipe that generalizes: one pair, one timestep.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from spikeline import (
    GrayImage,
    SensorConfig,
    SynthConfig,
    ToyCondDenoiser,
    apply_gain,
    make_schedule,
    psnr,
    sample,
    save_checkpoint,
    synth_sample,
    toy_training_run,
    write_pgm,
)


def build_scene(size: int, seed: int, lo: int = 6, hi: int = 48) -> np.ndarray:
    """Dim variant of the demo scene; low values keep firing rates sparse."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    angle = rng.uniform(0, 2 * np.pi)
    field = np.cos(angle) * xx + np.sin(angle) * yy
    for _ in range(3):
        cy, cx = rng.uniform(0.15, 0.85, 2)
        amp = rng.uniform(0.3, 1.2)
        sig = rng.uniform(0.12, 0.3)
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig**2))
    field -= field.min()
    field /= max(field.max(), 1e-12)
    return np.round(lo + field * (hi - lo)).astype(np.uint8)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=16)
    parser.add_argument("--frames", type=int, default=300)
    parser.add_argument("--degrade", type=float, default=2.0)
    parser.add_argument("--iterations", type=int, default=200)
    parser.add_argument("--lr", type=float, default=1e-2)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="train_out")
    args = parser.parse_args(argv)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    scene = build_scene(args.size, args.seed)
    sensor = SensorConfig(width=args.size, height=args.size)
    cfg = SynthConfig(crop_size=args.size, degrade_factor=args.degrade,
                      stream_frames=args.frames, sensor=sensor, seed=args.seed)
    enhanced, truth = synth_sample(GrayImage(scene), cfg)
    condition = apply_gain(enhanced, "auto").image
    (out / "cond.pgm").write_bytes(write_pgm(condition))
    (out / "truth.pgm").write_bytes(write_pgm(truth))

    params, trace = toy_training_run(condition, truth,
                                     iterations=args.iterations,
                                     lr=args.lr, seed=args.seed)
    stride = max(1, args.iterations // 10)
    for i in range(0, len(trace.losses), stride):
        print(f"iter {i:4d}  loss {trace.losses[i]:.6f}")
    print(f"iter {len(trace.losses) - 1:4d}  loss {trace.losses[-1]:.6f}")
    print(f"loss reduction {trace.reduction:.1%} over {args.iterations} iterations")

    ckpt = out / "denoiser.ckpt"
    save_checkpoint(params, ckpt)

    sched = make_schedule(50)
    sampled = sample(ToyCondDenoiser(params), condition, sched,
                     cfg_scale=2.0, seed=args.seed, params=params)
    (out / "sampled.pgm").write_bytes(write_pgm(sampled))
    print(f"toy sample vs truth: psnr {psnr(sampled, truth):.2f} dB "
          "(single-pair, single-timestep fit; treat as smoke signal)")
    print(f"checkpoint at {ckpt}; try it with:")
    print(f"  spikeline ddpm-demo --cond {out / 'cond.pgm'} "
          f"--denoiser checkpoint --checkpoint {ckpt} --steps 50 "
          f"--out {out / 'cli_sample.pgm'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
