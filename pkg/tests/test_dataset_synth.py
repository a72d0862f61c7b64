import numpy as np
import pytest

from spikeline import (
    GrayImage,
    NoiseModel,
    SampleManifest,
    SensorConfig,
    SynthConfig,
    bilinear_resize,
    current_for_value,
    degrade_image,
    image_to_stream,
    read_pgm,
    synth_dataset,
    synth_sample,
    write_pgm,
)
from spikeline.dataset_synth import WHITE_FIRING_RATE, _sample_seed

from conftest import toy_scene, write_toy_corpus


def _cfg(**kw):
    defaults = dict(
        crop_size=32,
        degrade_factor=2.0,
        stream_frames=200,
        sensor=SensorConfig(width=32, height=32),
        seed=1,
    )
    defaults.update(kw)
    return SynthConfig(**defaults)


class TestBilinearResize:
    def test_identity_when_same_size(self, rng):
        x = rng.uniform(0, 255, (6, 9))
        assert np.array_equal(bilinear_resize(x, 6, 9), x)

    def test_constant_preserved(self):
        x = np.full((4, 4), 77.0)
        assert np.allclose(bilinear_resize(x, 9, 3), 77.0)

    def test_axis_upsample_reference_values(self):
        # 2 -> 4 with half-pixel centers: positions -0.25, 0.25, 0.75,
        # 1.25 clamp to 0, 0.25, 0.75, 1
        out = bilinear_resize(np.array([[0.0, 255.0]]), 1, 4)
        assert np.allclose(out, [[0.0, 63.75, 191.25, 255.0]])

    def test_separable(self, rng):
        x = rng.uniform(0, 255, (8, 8))
        once = bilinear_resize(x, 5, 11)
        rows_then_cols = bilinear_resize(bilinear_resize(x, 5, 8), 5, 11)
        assert np.allclose(once, rows_then_cols)

    def test_rejects_empty_output(self):
        with pytest.raises(ValueError):
            bilinear_resize(np.zeros((2, 2)), 0, 2)


class TestDegradeImage:
    def test_factor_one_is_exact_copy(self, rng):
        img = GrayImage(pixels=rng.integers(0, 256, (16, 16), dtype=np.uint8))
        out = degrade_image(img, 1.0)
        assert np.array_equal(out.pixels, img.pixels)
        assert out.pixels is not img.pixels

    def test_checkerboard_collapses_to_mean(self):
        yy, xx = np.mgrid[0:16, 0:16]
        img = GrayImage(pixels=(255 * ((yy + xx) % 2)).astype(np.uint8))
        out = degrade_image(img, 2.0)
        # factor-2 box collapse of an alternating pattern is its mean
        assert np.abs(out.pixels.astype(float) - 128).max() <= 1

    def test_constant_image_unchanged_any_factor(self):
        img = GrayImage(pixels=np.full((20, 20), 91, dtype=np.uint8))
        for factor in (1.5, 2.0, 4.0):
            assert np.array_equal(degrade_image(img, factor).pixels, img.pixels)

    def test_dimensions_preserved(self, rng):
        img = GrayImage(pixels=rng.integers(0, 256, (15, 23), dtype=np.uint8))
        out = degrade_image(img, 3.0)
        assert out.pixels.shape == (15, 23)

    def test_smooth_content_mean_preserved(self):
        grad = np.round(np.linspace(20, 220, 24))[None, :] * np.ones((24, 1))
        img = GrayImage(pixels=grad.astype(np.uint8))
        out = degrade_image(img, 2.0)
        assert abs(out.pixels.mean() - img.pixels.mean()) < 2.0

    def test_removes_high_frequency_energy(self, rng):
        noise = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        img = GrayImage(pixels=noise)
        out = degrade_image(img, 4.0)
        assert out.pixels.std() < img.pixels.std()

    def test_rejects_factor_below_one(self):
        img = GrayImage(pixels=np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            degrade_image(img, 0.5)


class TestPhotometry:
    def test_white_maps_to_half_rate(self):
        sensor = SensorConfig(width=1, height=1)
        current = current_for_value(np.array([255.0]), sensor)
        rate = current * sensor.sample_period / sensor.threshold
        assert rate[0] == pytest.approx(WHITE_FIRING_RATE)

    def test_black_maps_to_zero(self):
        sensor = SensorConfig(width=1, height=1)
        assert current_for_value(np.array([0.0]), sensor)[0] == 0.0

    def test_linear_in_value(self):
        sensor = SensorConfig(width=1, height=1)
        c = current_for_value(np.array([60.0, 120.0]), sensor)
        assert c[1] == pytest.approx(2 * c[0])

    def test_stream_rate_tracks_value(self):
        img = GrayImage(pixels=np.full((8, 8), 255, dtype=np.uint8))
        cfg = _cfg(crop_size=8, stream_frames=400,
                   sensor=SensorConfig(width=8, height=8))
        stream = image_to_stream(img, cfg)
        assert stream.frame_count == 400
        assert abs(stream.bits.mean() - 0.5) <= 1.0 / 400 + 1e-12

    def test_black_image_never_fires(self):
        img = GrayImage(pixels=np.zeros((4, 4), dtype=np.uint8))
        stream = image_to_stream(img, _cfg(crop_size=4,
                                           sensor=SensorConfig(width=4, height=4)))
        assert not stream.bits.any()

    def test_sensor_geometry_follows_image(self):
        img = GrayImage(pixels=np.full((6, 10), 100, dtype=np.uint8))
        stream = image_to_stream(img, _cfg())
        assert (stream.config.height, stream.config.width) == (6, 10)


class TestSynthSample:
    def test_constant_image_gives_uniform_unit_enhancement(self):
        img = GrayImage(pixels=np.full((16, 16), 128, dtype=np.uint8))
        enhanced, truth = synth_sample(img, _cfg(crop_size=16))
        assert np.allclose(enhanced.raw, 1.0)
        assert np.array_equal(truth.pixels, img.pixels)

    def test_rank_correlation_with_ground_truth(self):
        from scipy.stats import spearmanr

        img = GrayImage(pixels=toy_scene(0, size=32))
        cfg = _cfg(stream_frames=600)
        enhanced, truth = synth_sample(img, cfg)
        rho = spearmanr(enhanced.raw.ravel(), truth.pixels.ravel()).statistic
        assert rho >= 0.95

    def test_deterministic(self):
        img = GrayImage(pixels=toy_scene(3, size=32))
        a, _ = synth_sample(img, _cfg())
        b, _ = synth_sample(img, _cfg())
        assert np.array_equal(a.image.pixels, b.image.pixels)
        assert np.array_equal(a.raw, b.raw)

    def test_workers_do_not_change_sample(self):
        img = GrayImage(pixels=toy_scene(4, size=32))
        cfg = _cfg(sensor=SensorConfig(
            width=32, height=32,
            noise=NoiseModel(shot_noise_enabled=True, photons_per_unit=80.0, seed=3)))
        a, _ = synth_sample(img, cfg, workers=1)
        b, _ = synth_sample(img, cfg, workers=4)
        assert np.array_equal(a.raw, b.raw)


class TestSynthDataset:
    def test_manifest_line_per_image(self, tmp_path):
        corpus = tmp_path / "corpus"
        out = tmp_path / "out"
        corpus.mkdir()
        write_toy_corpus(corpus, count=4, size=40)
        manifest = synth_dataset(corpus, out, _cfg())
        assert len(manifest.entries) == 4
        lines = (out / "manifest.tsv").read_text().splitlines()
        assert len(lines) == 4
        for entry in manifest.entries:
            e = read_pgm((out / entry.etfi_path.split("/")[-1]).read_bytes())
            g = read_pgm((out / entry.gt_path.split("/")[-1]).read_bytes())
            assert e.pixels.shape == (32, 32)
            assert g.pixels.shape == (32, 32)

    def test_rerun_is_byte_identical_noop(self, tmp_path):
        corpus = tmp_path / "corpus"
        out = tmp_path / "out"
        corpus.mkdir()
        write_toy_corpus(corpus, count=3, size=40)
        synth_dataset(corpus, out, _cfg())
        snapshot = {p.name: p.read_bytes() for p in out.iterdir()}
        synth_dataset(corpus, out, _cfg())
        after = {p.name: p.read_bytes() for p in out.iterdir()}
        assert after == snapshot

    def test_corrupt_image_is_skipped(self, tmp_path):
        corpus = tmp_path / "corpus"
        out = tmp_path / "out"
        corpus.mkdir()
        write_toy_corpus(corpus, count=3, size=40)
        (corpus / "broken.png").write_bytes(b"not an image at all")
        manifest = synth_dataset(corpus, out, _cfg())
        assert len(manifest.entries) == 3
        sources = {e.source.split("/")[-1] for e in manifest.entries}
        assert "broken.png" not in sources

    def test_undersized_image_is_skipped(self, tmp_path):
        corpus = tmp_path / "corpus"
        out = tmp_path / "out"
        corpus.mkdir()
        write_toy_corpus(corpus, count=2, size=40)
        tiny = GrayImage(pixels=np.full((8, 8), 30, dtype=np.uint8))
        (corpus / "tiny.pgm").write_bytes(write_pgm(tiny))
        manifest = synth_dataset(corpus, out, _cfg())
        assert len(manifest.entries) == 2

    def test_per_image_seeds_differ(self):
        a = _sample_seed(1, "scene_00.pgm")
        b = _sample_seed(1, "scene_01.pgm")
        c = _sample_seed(2, "scene_00.pgm")
        assert len({a, b, c}) == 3

    def test_manifest_round_trip(self, tmp_path):
        corpus = tmp_path / "corpus"
        out = tmp_path / "out"
        corpus.mkdir()
        write_toy_corpus(corpus, count=2, size=40)
        manifest = synth_dataset(corpus, out, _cfg())
        loaded = SampleManifest.load(out / "manifest.tsv")
        assert loaded.entries == manifest.entries


class TestSynthConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            SynthConfig(crop_size=0)
        with pytest.raises(ValueError):
            SynthConfig(degrade_factor=0.5)
        with pytest.raises(ValueError):
            SynthConfig(stream_frames=1)
