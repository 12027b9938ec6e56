"""
Annotating synthetic speech-like tones
======================================

The annotation pipeline turns audio into categorical prosody labels.
Pure tones with known pitch glides make every step checkable.
"""

import json

import numpy as np

from ptrlab import dsp, prosody, synth
from ptrlab.prosody import WordAlignment

# A 220 Hz tone: the pitch tracker should find 220 Hz in every frame.
tone = synth.tone(220, 0.5)
frames = dsp.frame_signal(tone, 25, 10)
track = dsp.pitch_track(frames, tone.sample_rate)
print("frames:", len(frames), "median f0: %.2f Hz" % np.nanmedian(track.f0_hz))

# Savitzky-Golay smoothing with a 5-point quadratic fit uses the
# classic kernel (-3, 12, 17, 12, -3) / 35.
print("kernel x35:", np.round(dsp.savgol_coefficients(5, 2) * 35, 6))

# A rise-then-fall glide. The contour is in semitones re 55 Hz, and the
# two half slopes decide the fine pattern.
arch = synth.piecewise_glide([(0.0, 150), (0.5, 300), (1.0, 150)])
contour = prosody.extract_contour(arch)
spread, s1, s2, whole = prosody.intonation_statistics(contour)
label = prosody.classify_intonation(contour)
print("range %.1f st, slopes %.1f / %.1f st/s -> %s, %s" % (spread, s1, s2, label.style, label.pattern))

# Full annotation with word timings. The second word is louder, so it
# picks up the stress.
loud_end = synth.concat(synth.chirp(160, 200, 0.5, amplitude=0.1), synth.chirp(200, 260, 0.5, amplitude=0.8))
words = [WordAlignment("not", 0.0, 0.45), WordAlignment("again", 0.5, 1.0)]
ann = prosody.annotate(loud_end, "not again", words, {"gender": "female", "age_group": "adult"})
print(json.dumps(ann.to_dict(), indent=2))

# Silence has no voiced frames, so the intonation stage refuses it.
try:
    prosody.annotate(synth.silence(1.0), "", [])
except prosody.AnnotationError as exc:
    print("silence:", exc.stage, "-", exc.cause)
