import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from ptrlab import dsp, synth


def sg_oracle(window, order):
    """Central smoothing weights from the normal equations, in exact rationals."""
    half = window // 2
    A = sympy.Matrix([[sympy.Integer(k) ** p for p in range(order + 1)] for k in range(-half, half + 1)])
    # fitted value at 0 is c0 = e0^T (A^T A)^{-1} A^T y
    row = (A.T * A).inv() * A.T
    return [row[0, j] for j in range(window)]


def audio(samples, sr=16000):
    return dsp.AudioBuffer(np.asarray(samples, dtype=float), sr)


class TestFraming:
    def test_one_second(self):
        frames = dsp.frame_signal(audio(np.zeros(16000)), 25, 10)
        assert len(frames) == (16000 - 400) // 160 + 1 == 98
        assert frames.frames.shape == (98, 400)

    def test_exact_frame(self):
        assert len(dsp.frame_signal(audio(np.zeros(400)), 25, 10)) == 1

    def test_too_short(self):
        frames = dsp.frame_signal(audio(np.zeros(300)), 25, 10)
        assert len(frames) == 0
        assert frames.frame_times.size == 0

    @pytest.mark.parametrize("frame_ms,hop_ms", [(0, 10), (25, 0), (-1, 10)])
    def test_rejects_nonpositive(self, frame_ms, hop_ms):
        with pytest.raises(ValueError):
            dsp.frame_signal(audio(np.zeros(1000)), frame_ms, hop_ms)

    def test_frame_times(self):
        frames = dsp.frame_signal(audio(np.arange(2000.0)), 25, 10)
        np.testing.assert_allclose(np.diff(frames.frame_times), 160 / 16000)
        assert frames.frame_times[0] == pytest.approx(200 / 16000)
        # frames are contiguous slices of the signal, no padding
        np.testing.assert_array_equal(frames.frames[3], np.arange(480.0, 880.0))

    @settings(max_examples=200, deadline=None)
    @given(n=st.integers(2, 5000), frame=st.integers(2, 600), hop=st.integers(1, 300))
    def test_count_formula(self, n, frame, hop):
        # 1 kHz so that ms == samples
        frames = dsp.frame_signal(dsp.AudioBuffer(np.zeros(n), 1000.0), frame, hop)
        expected = (n - frame) // hop + 1 if n >= frame else 0
        assert len(frames) == expected

    def test_audio_buffer_validation(self):
        with pytest.raises(ValueError):
            dsp.AudioBuffer(np.array([0.0, np.nan]), 16000)
        with pytest.raises(ValueError):
            dsp.AudioBuffer(np.zeros(10), 0)


class TestRms:
    def test_zero(self):
        assert dsp.rms_energy(np.zeros(100)) == 0.0

    def test_constant(self):
        assert dsp.rms_energy(np.full(100, 0.5)) == pytest.approx(0.5)

    def test_sine_integer_periods(self):
        n = 1600
        x = np.sin(2 * np.pi * 10 * np.arange(n) / n)
        assert abs(dsp.rms_energy(x) - 1 / math.sqrt(2)) < 1e-4

    def test_empty(self):
        with pytest.raises(ValueError):
            dsp.rms_energy([])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=50), st.floats(-10, 10))
    def test_homogeneous(self, frame, c):
        frame = np.array(frame)
        assert dsp.rms_energy(c * frame) == pytest.approx(abs(c) * dsp.rms_energy(frame), abs=1e-12)

    def test_db_floor_keeps_silence_finite(self):
        track = dsp.energy_track(dsp.frame_signal(audio(np.zeros(1000))))
        assert np.all(np.isfinite(track.db))
        assert track.db[0] == pytest.approx(-200.0)


class TestPitch:
    def test_220(self):
        t = np.arange(640) / 16000
        f0, clarity = dsp.estimate_f0(np.sin(2 * np.pi * 220 * t), 16000, 80, 400)
        assert abs(f0 - 220) / 220 < 0.02
        assert clarity > 0.9

    @pytest.mark.parametrize("freq", range(80, 401, 20))
    def test_tone_sweep_default_frame(self, freq):
        # 25 ms frame, the pipeline default
        t = np.arange(400) / 16000
        f0, _ = dsp.estimate_f0(np.sin(2 * np.pi * freq * t + 0.3), 16000, 80, 400)
        assert abs(f0 - freq) / freq < 0.02
        assert 80 <= f0 <= 400

    def test_silence(self):
        assert dsp.estimate_f0(np.zeros(640), 16000, 80, 400) is None

    def test_white_noise(self):
        rng = np.random.default_rng(0)
        noise = rng.uniform(-1, 1, 640)
        assert dsp.estimate_f0(noise, 16000, 80, 400, 0.5) is None
        # recorded with threshold 0: the best clarity found in the band is low
        _, clarity = dsp.estimate_f0(noise, 16000, 80, 400, 0.0)
        assert clarity < 0.3

    @pytest.mark.parametrize("band", [(400, 80), (0, 100), (80, 9000)])
    def test_bad_band(self, band):
        with pytest.raises(ValueError):
            dsp.estimate_f0(np.zeros(2000), 16000, *band)

    def test_frame_too_short(self):
        with pytest.raises(ValueError):
            dsp.estimate_f0(np.zeros(300), 16000, 80, 400)

    def test_voicing_invariant(self):
        frames = dsp.frame_signal(synth.concat(synth.tone(200, 0.3), synth.silence(0.3)))
        track = dsp.pitch_track(frames, 16000, voicing_threshold=0.5)
        voiced = track.voiced
        assert np.all(track.clarity[voiced] >= 0.5)
        assert np.all(track.clarity[~voiced] < 0.5) or np.all(track.clarity[~voiced] == 0)
        assert np.all((track.f0_hz[voiced] >= 80) & (track.f0_hz[voiced] <= 400))


class TestSavgol:
    def test_5_2_kernel(self):
        expected = np.array([-3, 12, 17, 12, -3]) / 35
        np.testing.assert_allclose(dsp.savgol_coefficients(5, 2), expected, atol=1e-9)
        oracle = np.array([float(v) for v in sg_oracle(5, 2)])
        np.testing.assert_allclose(oracle, expected, atol=1e-15)

    @pytest.mark.parametrize("window,order", [(3, 1), (7, 2), (7, 3), (9, 4), (11, 3), (11, 5), (15, 6)])
    def test_against_normal_equations(self, window, order):
        oracle = np.array([float(v) for v in sg_oracle(window, order)])
        np.testing.assert_allclose(dsp.savgol_coefficients(window, order), oracle, atol=1e-10)

    def test_moving_average(self):
        np.testing.assert_allclose(dsp.savgol_coefficients(3, 0), [1 / 3] * 3, atol=1e-12)

    def test_full_order_is_identity(self):
        np.testing.assert_allclose(dsp.savgol_coefficients(5, 4), [0, 0, 1, 0, 0], atol=1e-9)

    @pytest.mark.parametrize("window,order", [(4, 2), (5, 5), (1, 0), (5, -1)])
    def test_invalid(self, window, order):
        with pytest.raises(ValueError):
            dsp.savgol_coefficients(window, order)

    @pytest.mark.parametrize(
        "window,order", [(w, o) for w in (3, 5, 7, 9, 11, 21) for o in range(4) if o < w]
    )
    def test_symmetric_and_normalized(self, window, order):
        c = dsp.savgol_coefficients(window, order)
        assert abs(c.sum() - 1) < 1e-12
        np.testing.assert_allclose(c, c[::-1], atol=1e-12)

    def test_quadratic_reproduced(self):
        y = np.arange(21.0) ** 2
        out = dsp.savgol_smooth(y, 5, 2)
        assert out.shape == y.shape
        np.testing.assert_allclose(out[2:-2], y[2:-2], atol=1e-9)

    def test_constant_everywhere(self):
        y = np.full(17, 3.25)
        np.testing.assert_allclose(dsp.savgol_smooth(y, 11, 3), y, atol=1e-12)

    def test_symmetric_polynomial_at_boundary(self):
        # i**2 is even about i = 0, so mirroring extends it exactly on the left
        y = np.arange(21.0) ** 2
        np.testing.assert_allclose(dsp.savgol_smooth(y, 5, 2)[:2], y[:2], atol=1e-9)

    def test_impulse(self):
        x = np.zeros(11)
        x[5] = 1
        out = dsp.savgol_smooth(x, 5, 2)
        assert out[5] == pytest.approx(17 / 35, abs=1e-12)
        np.testing.assert_allclose(out[3:8], np.array([-3, 12, 17, 12, -3]) / 35, atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(-100, 100), min_size=12, max_size=40),
        st.floats(-5, 5),
        st.floats(-5, 5),
    )
    def test_linear(self, xs, a, b):
        x = np.array(xs)
        y = np.cos(np.arange(len(x)))
        lhs = dsp.savgol_smooth(a * x + b * y, 11, 3)
        rhs = a * dsp.savgol_smooth(x, 11, 3) + b * dsp.savgol_smooth(y, 11, 3)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_single_sample(self):
        np.testing.assert_array_equal(dsp.savgol_smooth([4.0], 5, 2), [4.0])

    def test_empty(self):
        with pytest.raises(ValueError):
            dsp.savgol_smooth([], 5, 2)
