"""Synthetic test signals: phase-continuous tones and pitch glides."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .dsp import AudioBuffer


def glide(f0_hz, sample_rate: float = 16000.0, amplitude: float = 0.5) -> AudioBuffer:
    """Sine whose instantaneous frequency follows ``f0_hz`` sample by sample."""
    f = np.asarray(f0_hz, dtype=np.float64)
    phase = 2 * np.pi * np.cumsum(f) / sample_rate
    return AudioBuffer(amplitude * np.sin(phase), sample_rate)


def tone(freq: float, duration: float = 1.0, sample_rate: float = 16000.0, amplitude: float = 0.5) -> AudioBuffer:
    n = int(round(duration * sample_rate))
    return glide(np.full(n, float(freq)), sample_rate, amplitude)


def chirp(f_start: float, f_end: float, duration: float = 1.0, sample_rate: float = 16000.0, amplitude: float = 0.5) -> AudioBuffer:
    n = int(round(duration * sample_rate))
    return glide(np.linspace(f_start, f_end, n), sample_rate, amplitude)


def piecewise_glide(points, sample_rate: float = 16000.0, amplitude: float = 0.5) -> AudioBuffer:
    """Linear-in-Hz glide through ``(time_s, freq_hz)`` breakpoints starting at t=0."""
    times, freqs = zip(*points)
    n = int(round(times[-1] * sample_rate))
    t = np.arange(n) / sample_rate
    return glide(np.interp(t, times, freqs), sample_rate, amplitude)


def silence(duration: float = 1.0, sample_rate: float = 16000.0) -> AudioBuffer:
    return AudioBuffer(np.zeros(int(round(duration * sample_rate))), sample_rate)


def concat(*buffers: AudioBuffer) -> AudioBuffer:
    rates = {b.sample_rate for b in buffers}
    if len(rates) != 1:
        raise ValueError("sample rates differ")
    return AudioBuffer(np.concatenate([b.samples for b in buffers]), rates.pop())


def write_wav(path, audio: AudioBuffer, float32: bool = False) -> None:
    if float32:
        wavfile.write(path, int(audio.sample_rate), audio.samples.astype(np.float32))
    else:
        pcm = np.clip(np.round(audio.samples * 32767), -32768, 32767).astype(np.int16)
        wavfile.write(path, int(audio.sample_rate), pcm)
