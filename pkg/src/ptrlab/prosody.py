"""Prosodic annotation built on the DSP primitives.

Turns a mono waveform plus word alignments into categorical pitch, energy
and speed levels, an intonation style/pattern and per-word stress flags.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from . import dsp

SEMITONE_REF_HZ = 55.0

STYLES = ("expressive", "flat")
PATTERNS = ("rising", "falling", "rising_falling", "falling_rising")
LEVELS = ("low", "medium", "high")
SPEEDS = ("slow", "medium", "fast")


class InsufficientVoicingError(ValueError):
    pass


class AnnotationError(Exception):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class AnalysisConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    f0_min: float = 80.0
    f0_max: float = 400.0
    voicing_threshold: float = 0.5
    sg_window: int = 11
    sg_order: int = 3
    range_threshold_st: float = 4.0
    slope_threshold_st_s: float = 1.0
    pitch_low_hz: float = 140.0
    pitch_high_hz: float = 220.0
    energy_low_db: float = -30.0
    energy_high_db: float = -15.0
    silence_floor_db: float = -60.0
    speed_slow_wps: float = 2.0
    speed_fast_wps: float = 3.3
    stress_threshold: float = 1.0


@dataclass(frozen=True)
class ProsodyContour:
    frame_times: np.ndarray
    f0_semitones: np.ndarray  # NaN where unvoiced
    f0_smoothed: np.ndarray
    energy_db: np.ndarray
    voiced: np.ndarray
    duration: float

    def __len__(self):
        return len(self.frame_times)


@dataclass(frozen=True)
class IntonationLabel:
    style: str
    pattern: str


@dataclass(frozen=True)
class ProsodyLevels:
    pitch_level: str
    energy_level: str
    speed_level: str


@dataclass(frozen=True)
class WordAlignment:
    word: str
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"word {self.word!r}: t_start must be < t_end")


@dataclass(frozen=True)
class StressAnnotation:
    words: tuple
    scores: tuple
    stressed: tuple

    def stressed_words(self):
        return [w for w, s in zip(self.words, self.stressed) if s]


@dataclass(frozen=True)
class ProsodyAnnotation:
    levels: ProsodyLevels
    intonation: IntonationLabel
    stress: StressAnnotation
    duration: float
    words_per_second: float
    speaker_traits: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "duration_s": self.duration,
            **asdict(self.levels),
            "intonation_style": self.intonation.style,
            "intonation_pattern": self.intonation.pattern,
            "words_per_second": self.words_per_second,
            "stressed_words": [
                [w.word, w.t_start, w.t_end] for w in self.stress.stressed_words()
            ],
            "speaker_traits": self.speaker_traits,
        }


def hz_to_semitones(f0_hz):
    return 12.0 * np.log2(np.asarray(f0_hz, dtype=np.float64) / SEMITONE_REF_HZ)


def semitones_to_hz(st):
    return SEMITONE_REF_HZ * 2.0 ** (np.asarray(st, dtype=np.float64) / 12.0)


def _voiced_runs(mask: np.ndarray):
    """Yield (start, stop) of maximal True runs."""
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2], edges[1::2]))


def smooth_voiced(values: np.ndarray, voiced: np.ndarray, window: int, order: int) -> np.ndarray:
    """Savitzky-Golay smoothing applied independently to each voiced run.

    Runs shorter than ``window`` use the largest odd window that fits, with
    the order lowered to stay below it; runs of 1-2 frames are copied.
    """
    out = np.full(len(values), np.nan)
    for start, stop in _voiced_runs(voiced):
        run = values[start:stop]
        n = stop - start
        w = window if n >= window else (n if n % 2 else n - 1)
        if w < 3:
            out[start:stop] = run
            continue
        out[start:stop] = dsp.savgol_smooth(run, w, min(order, w - 1))
    return out


def extract_contour(audio: dsp.AudioBuffer, config: AnalysisConfig = AnalysisConfig()) -> ProsodyContour:
    if len(audio.samples) == 0:
        raise ValueError("empty audio")
    frames = dsp.frame_signal(audio, config.frame_ms, config.hop_ms)
    pitch = dsp.pitch_track(
        frames, audio.sample_rate, config.f0_min, config.f0_max, config.voicing_threshold
    )
    energy = dsp.energy_track(frames)
    voiced = pitch.voiced
    st = np.full(len(frames), np.nan)
    st[voiced] = hz_to_semitones(pitch.f0_hz[voiced])
    smoothed = smooth_voiced(st, voiced, config.sg_window, config.sg_order)
    return ProsodyContour(frames.frame_times, st, smoothed, energy.db, voiced, audio.duration)


def _slope(t: np.ndarray, y: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    tc = t - t.mean()
    denom = np.dot(tc, tc)
    if denom <= 0:
        return 0.0
    slope = float(np.dot(tc, y - y.mean()) / denom)
    # rounding residue on flat contours must not decide the sign tie-break
    return 0.0 if abs(slope) < 1e-9 else slope


def intonation_statistics(contour: ProsodyContour):
    """Return (range_st, first_half_slope, second_half_slope, whole_slope).

    For an odd number of voiced frames the middle frame belongs to both
    halves, so the split is symmetric under time reversal.
    """
    t = contour.frame_times[contour.voiced]
    y = contour.f0_smoothed[contour.voiced]
    n = len(y)
    if n < 4:
        raise InsufficientVoicingError(f"need >= 4 voiced frames, found {n}")
    p5, p95 = np.percentile(y, [5, 95])
    first = slice(0, (n + 1) // 2)
    second = slice(n // 2, n)
    return (
        float(p95 - p5),
        _slope(t[first], y[first]),
        _slope(t[second], y[second]),
        _slope(t, y),
    )


def classify_intonation(contour: ProsodyContour, config: AnalysisConfig = AnalysisConfig()) -> IntonationLabel:
    spread, s1, s2, whole = intonation_statistics(contour)
    style = "expressive" if spread >= config.range_threshold_st else "flat"
    theta = config.slope_threshold_st_s
    if s1 >= theta and s2 >= -theta:
        pattern = "rising"
    elif s1 <= -theta and s2 <= theta:
        pattern = "falling"
    elif s1 >= theta and s2 <= -theta:
        pattern = "rising_falling"
    elif s1 <= -theta and s2 >= theta:
        pattern = "falling_rising"
    else:
        pattern = "rising" if whole >= 0 else "falling"
    return IntonationLabel(style, pattern)


def _level(value: float, low: float, high: float, names=LEVELS) -> str:
    if value < low:
        return names[0]
    if value > high:
        return names[2]
    return names[1]


def bin_levels(
    contour: ProsodyContour,
    duration: float,
    word_count: int,
    config: AnalysisConfig = AnalysisConfig(),
) -> ProsodyLevels:
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if word_count < 0:
        raise ValueError("word_count must be non-negative")

    if contour.voiced.any():
        median_hz = float(np.median(semitones_to_hz(contour.f0_semitones[contour.voiced])))
        pitch = _level(median_hz, config.pitch_low_hz, config.pitch_high_hz)
    else:
        pitch = "medium"

    loud = contour.energy_db[contour.energy_db > config.silence_floor_db]
    if loud.size:
        energy = _level(float(loud.mean()), config.energy_low_db, config.energy_high_db)
    else:
        energy = "low"

    speed = _level(word_count / duration, config.speed_slow_wps, config.speed_fast_wps, SPEEDS)
    return ProsodyLevels(pitch, energy, speed)


def _zscore(values: np.ndarray) -> np.ndarray:
    """Population z-scores; undefined (NaN) entries and zero spread give 0."""
    z = np.zeros(len(values))
    ok = ~np.isnan(values)
    if ok.sum() >= 2:
        sd = values[ok].std()
        if sd > 1e-12:
            z[ok] = (values[ok] - values[ok].mean()) / sd
    return z


def stress_prominence(
    contour: ProsodyContour,
    alignments: Sequence[WordAlignment],
    config: AnalysisConfig = AnalysisConfig(),
) -> StressAnnotation:
    """Prominence proxy for word stress.

    score = z(mean smoothed pitch) + z(peak energy) + z(duration), with
    z-scores taken across the utterance's words.
    """
    if not alignments:
        raise ValueError("no word alignments")
    tol = 1e-6
    prev_end = -np.inf
    for a in alignments:
        if a.t_start < -tol or a.t_end > contour.duration + tol:
            raise ValueError(
                f"alignment {a.word!r} [{a.t_start}, {a.t_end}] outside [0, {contour.duration}]"
            )
        if a.t_start < prev_end - tol:
            raise ValueError("alignments must be sorted and non-overlapping")
        prev_end = a.t_end

    n = len(alignments)
    pitch = np.full(n, np.nan)
    peak = np.full(n, np.nan)
    dur = np.empty(n)
    t = contour.frame_times
    for i, a in enumerate(alignments):
        inside = (t >= a.t_start) & (t < a.t_end)
        voiced = inside & contour.voiced
        if voiced.any():
            pitch[i] = contour.f0_smoothed[voiced].mean()
        if inside.any():
            peak[i] = contour.energy_db[inside].max()
        dur[i] = a.t_end - a.t_start

    scores = _zscore(pitch) + _zscore(peak) + _zscore(dur)
    stressed = scores > config.stress_threshold
    if not stressed.any():
        # earliest word among the maxima; scores equal up to rounding count as tied
        top = np.flatnonzero(scores >= scores.max() - 1e-9)
        stressed[int(top[0])] = True
    return StressAnnotation(tuple(alignments), tuple(float(s) for s in scores), tuple(bool(s) for s in stressed))


def annotate(
    audio: dsp.AudioBuffer,
    transcript: str,
    alignments: Sequence[WordAlignment],
    traits: Optional[dict] = None,
    config: AnalysisConfig = AnalysisConfig(),
) -> ProsodyAnnotation:
    """Run the full pipeline; any failure is re-raised as AnnotationError."""
    alignments = list(alignments)
    try:
        contour = extract_contour(audio, config)
    except Exception as exc:
        raise AnnotationError("contour", exc) from exc
    try:
        intonation = classify_intonation(contour, config)
    except Exception as exc:
        raise AnnotationError("intonation", exc) from exc
    duration = audio.duration
    word_count = len(alignments)
    try:
        levels = bin_levels(contour, duration, word_count, config)
    except Exception as exc:
        raise AnnotationError("levels", exc) from exc
    try:
        stress = stress_prominence(contour, alignments, config)
    except Exception as exc:
        raise AnnotationError("stress", exc) from exc
    return ProsodyAnnotation(
        levels=levels,
        intonation=intonation,
        stress=stress,
        duration=duration,
        words_per_second=word_count / duration,
        speaker_traits=dict(traits) if traits is not None else None,
    )
