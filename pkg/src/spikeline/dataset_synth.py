"""Training-pair synthesis: degrade an image, film it, enhance the stream.

Per source image: random crop, bilinear degrade (down then back up),
map pixel values to input currents, run the sensor simulation on the
static scene, take the interval map at the center frame and produce the
enhanced intensity image.  The (enhanced, original crop) pair is the
training sample; everything is deterministic per (seed, filename) so a
rerun over a corpus is byte-identical and resumable.

The photometric anchor maps white (255) to firing rate 0.5 instead of
1.0: saturated pixels would fire every frame (ISI 1) and carry no
headroom, rate 0.5 keeps ISI >= 2 across the whole value range.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .isi_etfi import EtfiImage, apply_gain, etfi, isi_search
from .spike_core import LuminanceVideo, SensorConfig, SpikeStream, simulate_stream
from .stream_io import GrayImage, quantize_u8, write_pgm

WHITE_FIRING_RATE = 0.5

_IMAGE_EXTS = {".png", ".pgm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one synthesis run; sensor geometry follows the crop."""

    crop_size: int = 512
    degrade_factor: float = 2.0
    stream_frames: int = 400
    sensor: SensorConfig = field(default_factory=lambda: SensorConfig(width=512, height=512))
    seed: int = 0

    def __post_init__(self):
        if self.crop_size < 1:
            raise ValueError("crop_size must be >= 1")
        if self.degrade_factor < 1:
            raise ValueError("degrade_factor must be >= 1")
        if self.stream_frames < 2:
            raise ValueError("stream_frames must be >= 2")


@dataclass(frozen=True)
class ManifestEntry:
    source: str
    etfi_path: str
    gt_path: str
    seed: int

    def line(self) -> str:
        return f"{self.source}\t{self.etfi_path}\t{self.gt_path}\t{self.seed}\n"


@dataclass
class SampleManifest:
    """Tab-separated sample index: source, enhanced, ground truth, seed."""

    path: Path
    entries: list[ManifestEntry]

    @classmethod
    def load(cls, path) -> "SampleManifest":
        path = Path(path)
        entries = []
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                source, e_path, g_path, seed = line.split("\t")
                entries.append(ManifestEntry(source, e_path, g_path, int(seed)))
        return cls(path=path, entries=entries)


def _resample_axis(values: np.ndarray, out_len: int, axis: int) -> np.ndarray:
    """Linear resample along one axis with half-pixel sample centers."""
    in_len = values.shape[axis]
    if out_len == in_len:
        return values
    scale = in_len / out_len
    pos = np.clip((np.arange(out_len) + 0.5) * scale - 0.5, 0.0, in_len - 1.0)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, in_len - 1)
    w = pos - lo
    v = np.moveaxis(values, axis, 0)
    shape = (out_len,) + (1,) * (v.ndim - 1)
    out = v[lo] * (1.0 - w).reshape(shape) + v[hi] * w.reshape(shape)
    return np.moveaxis(out, 0, axis)


def bilinear_resize(values, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of a 2-D float array, edges clamped."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be >= 1x1")
    values = np.asarray(values, dtype=np.float64)
    return _resample_axis(_resample_axis(values, out_h, 0), out_w, 1)


def degrade_image(img: GrayImage, factor: float) -> GrayImage:
    """Low-pass degradation: bilinear downscale by `factor`, upscale back."""
    if factor < 1:
        raise ValueError(f"degrade factor must be >= 1, got {factor}")
    if factor == 1:
        return GrayImage(img.pixels.copy())
    h, w = img.pixels.shape
    small_h = max(1, int(round(h / factor)))
    small_w = max(1, int(round(w / factor)))
    down = bilinear_resize(img.pixels, small_h, small_w)
    up = bilinear_resize(down, h, w)
    return GrayImage(quantize_u8(up))


def current_for_value(values, config: SensorConfig) -> np.ndarray:
    """Pixel value -> input current; 255 maps to firing rate 0.5."""
    i_scale = WHITE_FIRING_RATE * config.threshold / (config.sample_period * 255.0)
    return np.asarray(values, dtype=np.float64) * i_scale


def image_to_stream(img: GrayImage, cfg: SynthConfig, workers: int = 1) -> SpikeStream:
    """Film a static image: hold it for stream_frames sampling steps."""
    sensor = replace(cfg.sensor, width=img.width, height=img.height)
    current = current_for_value(img.pixels, sensor)
    video = LuminanceVideo.from_image(current, frames=cfg.stream_frames)
    return simulate_stream(video, sensor, workers=workers)


def synth_sample(img: GrayImage, cfg: SynthConfig,
                 workers: int = 1) -> tuple[EtfiImage, GrayImage]:
    """One training pair: enhanced stream reconstruction vs the clean crop."""
    degraded = degrade_image(img, cfg.degrade_factor)
    stream = image_to_stream(degraded, cfg, workers=workers)
    k = cfg.stream_frames // 2
    interval_map = isi_search(stream, k, workers=workers)
    return etfi(interval_map), GrayImage(img.pixels.copy())


def _sample_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _load_grayscale(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def synth_dataset(corpus_dir, out_dir, cfg: SynthConfig,
                  workers: int = 1) -> SampleManifest:
    """Run synth_sample over every image in a directory.

    Outputs land in out_dir as <stem>_etfi.pgm / <stem>_gt.pgm plus a
    manifest.tsv line per sample.  Existing outputs are skipped (resume),
    the manifest is append-only, and unreadable or undersized images are
    logged to stderr and skipped rather than failing the run.
    """
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in corpus_dir.iterdir()
                   if p.is_file() and p.suffix.lower() in _IMAGE_EXTS)

    manifest = SampleManifest.load(out_dir / "manifest.tsv")
    known = {e.source for e in manifest.entries}

    for i, path in enumerate(files):
        tag = f"[{i + 1}/{len(files)}] {path.name}"
        seed_i = _sample_seed(cfg.seed, path.name)
        etfi_path = out_dir / f"{path.stem}_etfi.pgm"
        gt_path = out_dir / f"{path.stem}_gt.pgm"
        entry = ManifestEntry(str(path), str(etfi_path), str(gt_path), seed_i)

        if etfi_path.exists() and gt_path.exists():
            print(f"{tag}: outputs exist, skipping", file=sys.stderr)
        else:
            try:
                pixels = _load_grayscale(path)
            except Exception as exc:
                print(f"{tag}: unreadable ({exc}), skipping", file=sys.stderr)
                continue
            if pixels.shape[0] < cfg.crop_size or pixels.shape[1] < cfg.crop_size:
                print(f"{tag}: {pixels.shape[1]}x{pixels.shape[0]} smaller than "
                      f"crop {cfg.crop_size}, skipping", file=sys.stderr)
                continue
            rng = np.random.Generator(np.random.Philox(key=seed_i))
            y0 = int(rng.integers(0, pixels.shape[0] - cfg.crop_size + 1))
            x0 = int(rng.integers(0, pixels.shape[1] - cfg.crop_size + 1))
            crop = GrayImage(pixels[y0:y0 + cfg.crop_size,
                                    x0:x0 + cfg.crop_size].copy())
            noise = replace(cfg.sensor.noise, seed=seed_i & 0xFFFFFFFFFFFFFFFF)
            per_image = replace(cfg, sensor=replace(cfg.sensor, noise=noise))
            try:
                enhanced, truth = synth_sample(crop, per_image, workers=workers)
            except ValueError as exc:
                print(f"{tag}: synthesis failed ({exc}), skipping", file=sys.stderr)
                continue
            # Auto gain before quantizing: raw ETFI values barely span a
            # dozen gray levels on dim scenes, which wastes the u8 range.
            etfi_path.write_bytes(write_pgm(apply_gain(enhanced, "auto").image))
            gt_path.write_bytes(write_pgm(truth))
            print(f"{tag}: ok", file=sys.stderr)

        if entry.source not in known:
            with open(manifest.path, "a", encoding="utf-8") as fh:
                fh.write(entry.line())
            manifest.entries.append(entry)
            known.add(entry.source)

    return manifest
