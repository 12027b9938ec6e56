"""
Scoring a group of responses
============================

A walk through the reward pieces for one query answered eight times.
"""

import math

from ptrlab import reward
from ptrlab.reward import CriterionScores, ScheduleState

# The policy must answer in two tagged blocks. Anything else earns no
# format reward and cannot be graded for its answer.
good = "<think>low pitch, slow pace, falling contour</think><answer>Sad</answer>"
bad = "Sad, because the pitch is low"
print("format:", reward.format_reward(good), reward.format_reward(bad))

# Answers are matched after trimming, lowercasing and an alias lookup.
print("label:", reward.canonicalize_label("  sadness. "), reward.canonicalize_label("ecstatic"))

# A reasoning reward model grades the think block on four 1-5 criteria.
# Uniform weights turn (3, 4, 2, 5) into 0.7.
g = CriterionScores(3, 4, 2, 5)
print("R_t:", reward.reasoning_reward(g))

# Now a group where the grader likes the wrong answers better than the
# right ones. The trust weight notices and shrinks the reasoning term.
responses = [good] * 4 + ["<think>bright and fast</think><answer>Happy</answer>"] * 4
scores = [CriterionScores(2, 2, 2, 2)] * 4 + [CriterionScores(5, 5, 5, 5)] * 4

closed = reward.score_group("Sad", responses, scores, state=ScheduleState())
print("gate closed, composites:", [round(r.composite, 3) for r in closed.records])

opened = reward.score_group("Sad", responses, scores, state=ScheduleState(gate_open=True))
print("tau = exp(%.1f - %.1f) = %.4f" % (opened.trust.mean_correct, opened.trust.mean_wrong, opened.trust.tau))
assert math.isclose(opened.trust.tau, math.exp(0.4 - 1.0))
print("gate open, composites:", [round(r.composite, 3) for r in opened.records])

# The gate opens once a full window of batch accuracies averages at
# least the threshold, and it never closes again.
state = ScheduleState(window_size=5, threshold=0.5)
for step, acc in enumerate([0.2, 0.4, 0.6, 0.7, 0.8, 0.1, 0.0]):
    state = reward.update_schedule(state, acc)
    print(f"step {step}: accuracy {acc:.1f} gate {'open' if state.gate_open else 'closed'}")
