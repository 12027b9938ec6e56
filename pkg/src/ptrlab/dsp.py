"""Short-time signal primitives: framing, RMS energy, autocorrelation pitch
and Savitzky-Golay smoothing.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

ENERGY_FLOOR = 1e-10


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("audio must be mono (1-D samples)")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameSeries:
    frames: np.ndarray  # (n_frames, frame_length)
    frame_length: int
    hop_length: int
    frame_times: np.ndarray

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True)
class PitchTrack:
    f0_hz: np.ndarray  # NaN where unvoiced
    clarity: np.ndarray

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0_hz)


@dataclass(frozen=True)
class EnergyTrack:
    rms: np.ndarray
    db: np.ndarray


def frame_signal(audio: AudioBuffer, frame_ms: float = 25.0, hop_ms: float = 10.0) -> FrameSeries:
    """Cut ``audio`` into overlapping windows; partial tail frames are dropped.

    Frame times are window centers in seconds.
    """
    if not frame_ms > 0 or not hop_ms > 0:
        raise ValueError(f"frame_ms and hop_ms must be positive, got {frame_ms}, {hop_ms}")
    sr = audio.sample_rate
    frame_length = int(round(frame_ms * sr / 1000.0))
    hop_length = max(1, int(round(hop_ms * sr / 1000.0)))
    if frame_length < 2:
        raise ValueError(f"frame of {frame_ms} ms is shorter than 2 samples at {sr} Hz")

    n = len(audio.samples)
    if n < frame_length:
        frames = np.empty((0, frame_length))
    else:
        n_frames = (n - frame_length) // hop_length + 1
        view = np.lib.stride_tricks.sliding_window_view(audio.samples, frame_length)
        frames = view[::hop_length][:n_frames].copy()
    starts = np.arange(len(frames)) * hop_length
    times = (starts + frame_length / 2.0) / sr
    return FrameSeries(frames, frame_length, hop_length, times)


def rms_energy(frame) -> float:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size == 0:
        raise ValueError("rms of an empty frame")
    return float(np.sqrt(np.mean(frame * frame)))


def energy_track(frames: FrameSeries) -> EnergyTrack:
    if len(frames) == 0:
        rms = np.empty(0)
    else:
        rms = np.sqrt(np.mean(frames.frames ** 2, axis=1))
    return EnergyTrack(rms, 20.0 * np.log10(rms + ENERGY_FLOOR))


def _normalized_autocorrelation(frame: np.ndarray, lags: np.ndarray) -> np.ndarray:
    n = len(frame)
    out = np.zeros(len(lags))
    for i, lag in enumerate(lags):
        a = frame[: n - lag]
        b = frame[lag:]
        denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
        if denom > 0:
            out[i] = np.dot(a, b) / denom
    return out


def estimate_f0(
    frame,
    sample_rate: float,
    f0_min: float = 80.0,
    f0_max: float = 400.0,
    voicing_threshold: float = 0.5,
) -> Optional[Tuple[float, float]]:
    """Estimate the fundamental frequency of one frame.

    Uses the normalized autocorrelation over the lag band
    ``[sample_rate / f0_max, sample_rate / f0_min]``. Among local maxima in
    the band, the shortest lag reaching 90% of the highest one is taken,
    which suppresses octave-down errors on strongly periodic input. The lag
    is refined by parabolic interpolation.

    Returns
    -------
    (f0_hz, clarity) or None when the peak clarity is below
    ``voicing_threshold``.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if not 0 < f0_min < f0_max < sample_rate / 2:
        raise ValueError(f"need 0 < f0_min < f0_max < sample_rate/2, got {f0_min}, {f0_max}")
    lag_lo = sample_rate / f0_max
    lag_hi = sample_rate / f0_min
    if len(frame) < 2 * lag_hi - 1e-9:
        raise ValueError(
            f"frame of {len(frame)} samples cannot hold two periods of {f0_min} Hz"
        )

    lo = max(1, int(np.floor(lag_lo)))
    hi = int(np.ceil(lag_hi))
    # one extra lag each side so band-edge peaks can be recognised
    lags = np.arange(max(1, lo - 1), min(hi + 1, len(frame) - 1) + 1)
    r = _normalized_autocorrelation(frame, lags)

    interior = np.arange(1, len(lags) - 1)
    is_peak = (r[interior] >= r[interior - 1]) & (r[interior] > r[interior + 1])
    peaks = interior[is_peak]
    peaks = peaks[(lags[peaks] >= lag_lo - 1e-9) & (lags[peaks] <= lag_hi + 1e-9)]
    if len(peaks) == 0:
        return None
    best = r[peaks].max()
    if best <= 0:
        return None
    k = peaks[np.argmax(r[peaks] >= 0.9 * best)]

    a, b, c = r[k - 1], r[k], r[k + 1]
    denom = a - 2 * b + c
    shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    shift = float(np.clip(shift, -0.5, 0.5))
    clarity = float(np.clip(b - 0.25 * (a - c) * shift, 0.0, 1.0))
    if clarity < voicing_threshold:
        return None
    lag = float(np.clip(lags[k] + shift, lag_lo, lag_hi))
    return sample_rate / lag, clarity


def pitch_track(
    frames: FrameSeries,
    sample_rate: float,
    f0_min: float = 80.0,
    f0_max: float = 400.0,
    voicing_threshold: float = 0.5,
) -> PitchTrack:
    f0 = np.full(len(frames), np.nan)
    clarity = np.zeros(len(frames))
    for i, frame in enumerate(frames.frames):
        est = estimate_f0(frame, sample_rate, f0_min, f0_max, voicing_threshold)
        if est is not None:
            f0[i], clarity[i] = est
    return PitchTrack(f0, clarity)


def savgol_coefficients(window: int, order: int) -> np.ndarray:
    """Central-point least-squares smoothing kernel.

    Row 0 of the pseudo-inverse of the Vandermonde matrix over offsets
    ``-h..h``: the fitted polynomial's value at offset 0.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if not 0 <= order < window:
        raise ValueError(f"order must satisfy 0 <= order < window, got {order}")
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    vander = offsets[:, None] ** np.arange(order + 1)[None, :]
    return np.linalg.pinv(vander)[0]


def savgol_smooth(series, window: int = 11, order: int = 3) -> np.ndarray:
    """Savitzky-Golay smoothing with mirror padding (edge sample not repeated)."""
    series = np.asarray(series, dtype=np.float64)
    coeffs = savgol_coefficients(window, order)
    if series.size == 0:
        raise ValueError("cannot smooth an empty series")
    if series.size == 1:
        return series.copy()
    half = window // 2
    padded = np.pad(series, half, mode="reflect")
    return np.correlate(padded, coeffs, mode="valid")
