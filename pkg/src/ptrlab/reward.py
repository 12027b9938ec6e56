"""Reward algebra for progressive trust-aware reasoning rewards.

Format and outcome rewards are rule-based. The reasoning reward averages
four 1-5 criterion scores. A group-level trust weight shrinks the
reasoning reward when wrong answers out-score correct ones, and a latched
schedule keeps the reasoning term off until outcome accuracy stabilises.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class Emotion(str, enum.Enum):
    NEUTRAL = "Neutral"
    HAPPY = "Happy"
    SAD = "Sad"
    ANGRY = "Angry"
    CONTEMPT_DISGUST = "Contempt/Disgust"
    CONFUSED = "Confused"
    WHISPER = "Whisper"
    SURPRISE = "Surprise"
    FEAR = "Fear"

    def __str__(self):
        return self.value


_ALIASES = {
    "neutral": Emotion.NEUTRAL,
    "calm": Emotion.NEUTRAL,
    "happy": Emotion.HAPPY,
    "happiness": Emotion.HAPPY,
    "joy": Emotion.HAPPY,
    "sad": Emotion.SAD,
    "sadness": Emotion.SAD,
    "angry": Emotion.ANGRY,
    "anger": Emotion.ANGRY,
    "contempt/disgust": Emotion.CONTEMPT_DISGUST,
    "contempt": Emotion.CONTEMPT_DISGUST,
    "disgust": Emotion.CONTEMPT_DISGUST,
    "disgusted": Emotion.CONTEMPT_DISGUST,
    "confused": Emotion.CONFUSED,
    "confusion": Emotion.CONFUSED,
    "whisper": Emotion.WHISPER,
    "whispering": Emotion.WHISPER,
    "surprise": Emotion.SURPRISE,
    "surprised": Emotion.SURPRISE,
    "fear": Emotion.FEAR,
    "fearful": Emotion.FEAR,
    "afraid": Emotion.FEAR,
}

CRITERIA = (
    "factual_alignment",
    "interpretative_quality",
    "caption_completeness",
    "fluency_and_structural_clarity",
)

R_T_FLOOR = 0.2


def canonicalize_label(text) -> Optional[Emotion]:
    """Map free answer text onto an Emotion, or None if unrecognised."""
    if isinstance(text, Emotion):
        return text
    key = str(text).strip().rstrip(".!?,;:").strip().lower()
    return _ALIASES.get(key)


class FormatError(ValueError):
    """Response does not follow the think/answer schema."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class ParsedResponse:
    think: str
    answer: str


_TAG = re.compile(r"</?(think|answer)>")


def parse_response(text: str) -> ParsedResponse:
    """Strict parse of ``<think>..</think><answer>..</answer>``.

    Only whitespace may surround the two blocks. Tag names are
    case-sensitive. Raises FormatError with ``reason`` one of
    missing-think, missing-answer, wrong-order, extra-content,
    duplicate-block.
    """
    tags = [(m.group(0), m.start(), m.end()) for m in _TAG.finditer(text)]
    names = [t[0] for t in tags]
    n_think = names.count("<think>") + names.count("</think>")
    n_answer = names.count("<answer>") + names.count("</answer>")
    if names.count("<think>") > 1 or names.count("</think>") > 1:
        raise FormatError("duplicate-block", "more than one think block")
    if names.count("<answer>") > 1 or names.count("</answer>") > 1:
        raise FormatError("duplicate-block", "more than one answer block")
    if names.count("<think>") != 1 or names.count("</think>") != 1:
        raise FormatError("missing-think", f"{n_think} think tags")
    if names.count("<answer>") != 1 or names.count("</answer>") != 1:
        raise FormatError("missing-answer", f"{n_answer} answer tags")

    expected = ["<think>", "</think>", "<answer>", "</answer>"]
    if names != expected:
        if names.index("<answer>") < names.index("<think>"):
            raise FormatError("wrong-order", "answer precedes think")
        # nested or interleaved tags
        raise FormatError("extra-content", "tags are nested or interleaved")

    (_, _, think_open), (_, think_close, think_end), (_, ans_open, ans_start), (_, ans_close, ans_end) = tags
    outside = text[:tags[0][1]] + text[think_end:ans_open] + text[ans_end:]
    if outside.strip():
        raise FormatError("extra-content", "non-whitespace outside the blocks")
    return ParsedResponse(text[think_open:think_close], text[ans_start:ans_close])


def format_reward(text: str) -> int:
    try:
        parse_response(text)
    except FormatError:
        return 0
    return 1


def outcome_reward(answer_text, gold) -> int:
    gold = canonicalize_label(gold)
    if gold is None:
        raise ValueError("gold label is not a recognised emotion")
    return int(canonicalize_label(answer_text) == gold)


@dataclass(frozen=True)
class CriterionScores:
    factual_alignment: int
    interpretative_quality: int
    caption_completeness: int
    fluency_and_structural_clarity: int

    def __post_init__(self):
        for name in CRITERIA:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 1 <= v <= 5:
                raise ValueError(f"{name} must be an integer in 1-5, got {v!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "CriterionScores":
        missing = [c for c in CRITERIA if c not in d]
        if missing:
            raise ValueError(f"criterion_scores missing {', '.join(missing)}")
        return cls(**{c: d[c] for c in CRITERIA})

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in CRITERIA)


@dataclass(frozen=True)
class ReasoningWeights:
    w: tuple = (0.25, 0.25, 0.25, 0.25)

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        if len(w) != 4:
            raise ValueError("need exactly four reasoning weights")
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"reasoning weights must be non-negative and sum to 1, got {w}")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class RewardWeights:
    alpha_f: float = 0.3
    alpha_o: float = 1.0
    alpha_t: float = 0.5

    def __post_init__(self):
        if min(self.alpha_f, self.alpha_o, self.alpha_t) < 0:
            raise ValueError("reward weights must be non-negative")


def reasoning_reward(g: CriterionScores, w: ReasoningWeights = ReasoningWeights()) -> float:
    if not isinstance(w, ReasoningWeights):
        w = ReasoningWeights(tuple(w))
    return sum(wj * gj / 5.0 for wj, gj in zip(w.w, g.as_tuple()))


@dataclass(frozen=True)
class TrustStats:
    mean_correct: Optional[float]
    mean_wrong: Optional[float]
    tau: float


def trust_weight(records) -> TrustStats:
    """Trust weight from (outcome_reward, reasoning_reward) pairs.

    tau = exp(mean_correct - mean_wrong) when correct responses have the
    lower mean reasoning reward, else 1. An empty side gives tau = 1.
    """
    records = list(records)
    if not records:
        raise ValueError("trust_weight needs at least one record")
    correct = [rt for ro, rt in records if ro == 1]
    wrong = [rt for ro, rt in records if ro != 1]
    mc = math.fsum(correct) / len(correct) if correct else None
    mw = math.fsum(wrong) / len(wrong) if wrong else None
    if mc is None or mw is None or mc >= mw:
        tau = 1.0
    else:
        tau = math.exp(mc - mw)
    return TrustStats(mc, mw, tau)


def composite_reward(r_f, r_o, r_t, tau, alpha: RewardWeights = RewardWeights(), gate_open: bool = True) -> float:
    base = alpha.alpha_f * r_f + alpha.alpha_o * r_o
    if not gate_open:
        return base
    return base + alpha.alpha_t * tau * r_t


@dataclass(frozen=True)
class ScheduleState:
    window_size: int = 20
    threshold: float = 0.5
    gate_open: bool = False
    accuracy_window: tuple = ()

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


def update_schedule(state: ScheduleState, batch_accuracy: float) -> ScheduleState:
    if not 0.0 <= batch_accuracy <= 1.0:
        raise ValueError(f"batch accuracy must lie in [0, 1], got {batch_accuracy}")
    window = (state.accuracy_window + (float(batch_accuracy),))[-state.window_size:]
    gate = state.gate_open or (
        len(window) == state.window_size and sum(window) / len(window) >= state.threshold
    )
    return ScheduleState(state.window_size, state.threshold, gate, window)


@dataclass(frozen=True)
class ResponseRecord:
    format_reward: int
    outcome_reward: int
    reasoning_reward: float
    composite: float
    answer: Optional[Emotion] = None


@dataclass(frozen=True)
class GroupResult:
    records: tuple
    trust: TrustStats
    state: ScheduleState
    reasoning_terms: tuple = field(default=())

    def __iter__(self):
        return iter((self.records, self.trust, self.state))


def score_group(
    gold,
    responses: Sequence[str],
    criterion_scores: Sequence[Optional[CriterionScores]],
    w: ReasoningWeights = ReasoningWeights(),
    alpha: RewardWeights = RewardWeights(),
    state: ScheduleState = ScheduleState(),
    trust_enabled: bool = True,
) -> GroupResult:
    """Score K responses to one query.

    Responses failing the format check, or lacking criterion scores, get
    the reasoning-reward floor 0.2. The gate in ``state`` is read before
    the state is advanced with this group's accuracy. With
    ``trust_enabled=False`` the returned TrustStats carries tau = 1, the
    value actually applied.
    """
    if len(responses) != len(criterion_scores):
        raise ValueError("responses and criterion_scores must be aligned")
    if not responses:
        raise ValueError("empty response group")
    gold = canonicalize_label(gold)
    if gold is None:
        raise ValueError("gold label is not a recognised emotion")

    parts = []
    for i, (text, g) in enumerate(zip(responses, criterion_scores)):
        try:
            parsed = parse_response(text)
        except FormatError:
            parts.append((0, 0, R_T_FLOOR, None))
            continue
        answer = canonicalize_label(parsed.answer)
        r_o = int(answer == gold)
        try:
            r_t = reasoning_reward(g, w) if g is not None else R_T_FLOOR
        except ValueError as exc:
            raise ValueError(f"response {i}: {exc}") from exc
        parts.append((1, r_o, r_t, answer))

    trust = trust_weight([(r_o, r_t) for _, r_o, r_t, _ in parts])
    if not trust_enabled:
        trust = TrustStats(trust.mean_correct, trust.mean_wrong, 1.0)
    tau = trust.tau
    records = []
    terms = []
    for r_f, r_o, r_t, answer in parts:
        total = composite_reward(r_f, r_o, r_t, tau, alpha, state.gate_open)
        records.append(ResponseRecord(r_f, r_o, r_t, total, answer))
        terms.append(alpha.alpha_t * tau * r_t if state.gate_open else 0.0)
    accuracy = sum(p[1] for p in parts) / len(parts)
    return GroupResult(tuple(records), trust, update_schedule(state, accuracy), tuple(terms))
