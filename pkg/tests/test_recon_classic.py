import numpy as np
import pytest

from spikeline import (
    IsiMap,
    LuminanceVideo,
    SensorConfig,
    SpikeStream,
    isi_search,
    simulate_stream,
    tfi,
    tfi_current,
    tfp,
)

from conftest import constant_scene_stream


def _map(isi):
    isi = np.asarray(isi, dtype=np.int64)
    return IsiMap(isi=isi, valid=np.ones_like(isi, dtype=bool), k=0)


class TestTfi:
    def test_current_estimate_formula(self):
        config = SensorConfig(width=2, height=1, threshold=2.0, sample_period=1e-4)
        current = tfi_current(_map([[4, 10]]), config)
        assert np.allclose(current, [[2.0 / 4e-4, 2.0 / 1e-3]])

    def test_uniform_interval_gives_uniform_image(self):
        config = SensorConfig(width=3, height=3)
        img = tfi(_map(np.full((3, 3), 5)), config)
        assert len(np.unique(img.pixels)) == 1

    def test_default_gain_maps_one_frame_interval_to_white(self):
        config = SensorConfig(width=2, height=1)
        img = tfi(_map([[1, 2]]), config)
        assert img.pixels[0, 0] == 255
        assert img.pixels[0, 1] == 128

    def test_gain_and_interval_double_cancel(self):
        config = SensorConfig(width=4, height=4)
        rng = np.random.default_rng(0)
        isi = rng.integers(1, 40, size=(4, 4))
        g0 = 255 * config.sample_period / config.threshold
        # doubling the interval at double gain lands on the same estimate
        doubled = tfi(_map(2 * isi), config, gain=2.0 * g0)
        assert np.array_equal(doubled.pixels, tfi(_map(isi), config).pixels)
        # doubling only the gain doubles the output up to rounding
        base = tfi(_map(isi), config).pixels.astype(int)
        hot = tfi(_map(isi), config, gain=2.0 * g0).pixels.astype(int)
        mask = hot < 255
        assert np.all(np.abs(hot[mask] - 2 * base[mask]) <= 1)

    def test_recovers_constant_current_within_interval_resolution(self):
        # measured interval misses the true one by at most one frame of
        # phase, so the relative current error is bounded by 1/ISI
        config = SensorConfig(width=8, height=8)
        for rate in (0.04, 0.11, 0.23):
            current = rate * config.threshold / config.sample_period
            video = LuminanceVideo.from_image(np.full((8, 8), current), frames=200)
            stream = simulate_stream(video, config)
            m = isi_search(stream, 100)
            assert m.valid.all()
            estimate = tfi_current(m, config)
            rel = np.abs(estimate - current) / current
            assert (rel <= 1.0 / m.isi + 1e-12).all()

    def test_rejects_nonpositive_gain(self):
        config = SensorConfig(width=1, height=1)
        with pytest.raises(ValueError):
            tfi(_map([[3]]), config, gain=0.0)


class TestTfp:
    def test_saturated_window_is_white(self):
        bits = np.ones((21, 3, 3), dtype=np.uint8)
        stream = SpikeStream(config=SensorConfig(width=3, height=3), bits=bits)
        img = tfp(stream, 10, 10)
        assert (img.pixels == 255).all()

    def test_silent_window_is_black(self):
        bits = np.zeros((21, 3, 3), dtype=np.uint8)
        stream = SpikeStream(config=SensorConfig(width=3, height=3), bits=bits)
        assert not tfp(stream, 10, 10).pixels.any()

    def test_quarter_rate_maps_near_64(self):
        stream = constant_scene_stream(0.25, size=8, frames=401)
        img = tfp(stream, 200, 200)
        assert np.all(np.abs(img.pixels.astype(int) - 64) <= 1)

    def test_gain_scales_output(self):
        stream = constant_scene_stream(0.5, size=4, frames=41)
        a = tfp(stream, 20, 20, gain=100.0)
        assert np.all(np.abs(a.pixels.astype(int) - 50) <= 1)

    def test_window_must_fit_stream(self):
        stream = constant_scene_stream(0.5, size=2, frames=20)
        with pytest.raises(ValueError):
            tfp(stream, 10, 15)

    def test_monotone_in_scene_brightness(self):
        dim = constant_scene_stream(0.1, size=4, frames=101)
        bright = constant_scene_stream(0.3, size=4, frames=101)
        a = tfp(dim, 50, 50)
        b = tfp(bright, 50, 50)
        assert (b.pixels.astype(int) >= a.pixels.astype(int)).all()
        assert b.pixels.mean() > a.pixels.mean()
