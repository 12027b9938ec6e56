"""Synthetic emotion-reasoning environment.

A query is a vector of four prosodic slot categories drawn around an
emotion prototype. The toy policy is a softmax classifier over emotions
plus one fidelity parameter: each reasoning claim reports the true slot
category with probability phi, otherwise a uniform guess. Responses are
rendered into the think/answer template and scored through the reward
module, with a deterministic stand-in for the reasoning reward model.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import grpo
from .reward import (
    CriterionScores,
    Emotion,
    ReasoningWeights,
    RewardWeights,
    ScheduleState,
    canonicalize_label,
    score_group,
    update_schedule,
)

SLOTS = (
    ("pitch", ("low", "medium", "high")),
    ("energy", ("low", "medium", "high")),
    ("pace", ("slow", "medium", "fast")),
    ("intonation", ("rising", "falling", "rising_falling", "falling_rising")),
)
SLOT_SIZES = tuple(len(c) for _, c in SLOTS)
N_FEATURES = sum(SLOT_SIZES) + 1
_OFFSETS = np.concatenate([[0], np.cumsum(SLOT_SIZES)[:-1]])


def _row(*names):
    return tuple(cats.index(n) for (_, cats), n in zip(SLOTS, names))


PROTOTYPES_9 = {
    Emotion.NEUTRAL: _row("medium", "medium", "medium", "falling"),
    Emotion.HAPPY: _row("high", "high", "fast", "rising"),
    Emotion.SAD: _row("low", "low", "slow", "falling"),
    Emotion.ANGRY: _row("high", "high", "fast", "rising_falling"),
    Emotion.CONTEMPT_DISGUST: _row("low", "medium", "slow", "falling_rising"),
    Emotion.CONFUSED: _row("medium", "low", "slow", "rising"),
    Emotion.WHISPER: _row("low", "low", "medium", "falling"),
    Emotion.SURPRISE: _row("high", "medium", "medium", "rising"),
    Emotion.FEAR: _row("high", "low", "fast", "rising"),
}
DEFAULT_EMOTIONS = (Emotion.NEUTRAL, Emotion.HAPPY, Emotion.SAD, Emotion.ANGRY)


@dataclass(frozen=True)
class PrototypeTable:
    emotions: tuple
    rows: tuple  # one tuple of slot indices per emotion

    def __post_init__(self):
        if len(self.emotions) != len(self.rows):
            raise ValueError("prototype table needs one row per emotion")
        if len(self.emotions) < 2:
            raise ValueError("need at least 2 emotions for a classification task")
        for row in self.rows:
            if len(row) != len(SLOTS) or any(not 0 <= c < n for c, n in zip(row, SLOT_SIZES)):
                raise ValueError(f"invalid prototype row {row}")
        if len(set(self.rows)) != len(self.rows):
            raise ValueError("prototype rows must be pairwise distinct")
        if len(set(self.emotions)) != len(self.emotions):
            raise ValueError("duplicate emotion in prototype table")

    @classmethod
    def for_emotions(cls, emotions: Sequence = DEFAULT_EMOTIONS) -> "PrototypeTable":
        labels = []
        for e in emotions:
            label = canonicalize_label(e)
            if label is None:
                raise ValueError(f"unknown emotion {e!r}")
            labels.append(label)
        return cls(tuple(labels), tuple(PROTOTYPES_9[e] for e in labels))

    def prototype(self, emotion) -> tuple:
        return self.rows[self.emotions.index(emotion)]

    def __len__(self):
        return len(self.emotions)


def slot_names(slots) -> tuple:
    return tuple(cats[c] for (_, cats), c in zip(SLOTS, slots))


def encode_features(slots) -> np.ndarray:
    x = np.zeros(N_FEATURES)
    x[_OFFSETS + np.asarray(slots)] = 1.0
    x[-1] = 1.0
    return x


@dataclass(frozen=True)
class ToyQuery:
    true_slots: tuple
    gold_label: Emotion
    features: np.ndarray = field(compare=False, repr=False)


def generate_dataset(seed, n: int, noise: float, table: PrototypeTable) -> List[ToyQuery]:
    """Draw ``n`` queries: uniform emotion, each prototype slot replaced
    by a different category with probability ``noise``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= noise <= 1.0:
        raise ValueError(f"noise must lie in [0, 1], got {noise}")
    rng = np.random.default_rng(seed)
    emotion_idx = rng.integers(len(table), size=n)
    flip = rng.random((n, len(SLOTS))) < noise
    # offset in 1..C-1 picks a uniformly random *different* category
    shift = np.stack([rng.integers(1, c, size=n) for c in SLOT_SIZES], axis=1)
    out = []
    for i in range(n):
        proto = np.array(table.rows[emotion_idx[i]])
        slots = np.where(flip[i], (proto + shift[i]) % SLOT_SIZES, proto)
        slots = tuple(int(s) for s in slots)
        out.append(ToyQuery(slots, table.emotions[emotion_idx[i]], encode_features(slots)))
    return out


@dataclass(frozen=True)
class ToyPolicyParams:
    label_weights: np.ndarray  # (E, N_FEATURES)
    fidelity_logit: float = 0.0

    @property
    def fidelity(self) -> float:
        return float(1.0 / (1.0 + np.exp(-self.fidelity_logit)))

    @classmethod
    def zeros(cls, n_emotions: int, fidelity_logit: float = 0.0) -> "ToyPolicyParams":
        return cls(np.zeros((n_emotions, N_FEATURES)), float(fidelity_logit))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.label_weights.ravel(), [self.fidelity_logit]])

    def from_vector(self, vec) -> "ToyPolicyParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.label_weights.size + 1,):
            raise ValueError(f"expected vector of length {self.label_weights.size + 1}, got {vec.shape}")
        return ToyPolicyParams(vec[:-1].reshape(self.label_weights.shape).copy(), float(vec[-1]))


@dataclass(frozen=True)
class ToyResponse:
    label: Emotion
    claims: tuple
    label_logprob: float
    claim_logprobs: tuple
    rendered_text: str

    @property
    def total_logprob(self) -> float:
        return self.label_logprob + sum(self.claim_logprobs)


def render_trace(claims, label) -> str:
    p, e, s, i = slot_names(claims)
    return (
        f"<think>pitch is {p}; energy is {e}; pace is {s}; intonation is {i}</think>"
        f"<answer>{label}</answer>"
    )


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def claim_probabilities(phi: float, true_slot: int, n_categories: int) -> np.ndarray:
    p = np.full(n_categories, (1.0 - phi) / n_categories)
    p[true_slot] += phi
    return p


def group_logprobs(params: ToyPolicyParams, query: ToyQuery, labels: np.ndarray, claims: np.ndarray):
    """Log-probs of given (label index, claims) rollouts under ``params``.

    Returns (label_logp[k], claim_logp[k, 4]).
    """
    logits = params.label_weights @ query.features
    label_logp = _log_softmax(logits)[labels]
    phi = params.fidelity
    claim_logp = np.empty(claims.shape)
    for s, n_cat in enumerate(SLOT_SIZES):
        hit = claims[:, s] == query.true_slots[s]
        claim_logp[:, s] = np.log(np.where(hit, phi + (1.0 - phi) / n_cat, (1.0 - phi) / n_cat))
    return label_logp, claim_logp


def sample_group(params: ToyPolicyParams, query: ToyQuery, k: int, rng: np.random.Generator, table: PrototypeTable) -> List[ToyResponse]:
    logits = params.label_weights @ query.features
    probs = np.exp(_log_softmax(logits))
    labels = np.minimum(np.searchsorted(np.cumsum(probs), rng.random(k), side="right"), len(probs) - 1)
    phi = params.fidelity
    claims = np.empty((k, len(SLOTS)), dtype=np.int64)
    for s, n_cat in enumerate(SLOT_SIZES):
        cdf = np.cumsum(claim_probabilities(phi, query.true_slots[s], n_cat))
        claims[:, s] = np.minimum(np.searchsorted(cdf, rng.random(k), side="right"), n_cat - 1)
    label_logp, claim_logp = group_logprobs(params, query, labels, claims)
    out = []
    for i in range(k):
        label = table.emotions[labels[i]]
        c = tuple(int(v) for v in claims[i])
        out.append(ToyResponse(label, c, float(label_logp[i]), tuple(float(v) for v in claim_logp[i]), render_trace(c, label)))
    return out


def policy_sample(params: ToyPolicyParams, query: ToyQuery, rng: np.random.Generator, table: Optional[PrototypeTable] = None) -> ToyResponse:
    if table is None:
        table = PrototypeTable.for_emotions(DEFAULT_EMOTIONS[: params.label_weights.shape[0]])
    return sample_group(params, query, 1, rng, table)[0]


def mock_rm_score(response: ToyResponse, query: ToyQuery, table: PrototypeTable, adversarial: bool = False) -> CriterionScores:
    """Deterministic stand-in for the reasoning reward model.

    Normal mode rewards claims that match the true slots (factual) and the
    prototype of the answered label (interpretative). Adversarial mode
    scores wrong answers 5 and correct answers 1 on every criterion.
    """
    if adversarial:
        v = 1 if response.label == query.gold_label else 5
        return CriterionScores(v, v, v, v)
    n = len(SLOTS)
    m = sum(c == t for c, t in zip(response.claims, query.true_slots)) / n
    m_proto = sum(c == t for c, t in zip(response.claims, table.prototype(response.label))) / n
    return CriterionScores(int(round(1 + 4 * m)), int(round(1 + 4 * m_proto)), 5, 5)


# -- gradient of the GRPO loss through the toy policy --------------------------


@dataclass
class SampledGroup:
    """A frozen rollout group: everything the loss needs except params."""

    query: ToyQuery
    labels: np.ndarray
    claims: np.ndarray
    advantages: np.ndarray
    ref_logp: np.ndarray


def batch_loss_and_gradient(params: ToyPolicyParams, groups: Sequence[SampledGroup], beta: float):
    """Mean GRPO loss over groups and its gradient as a ToyPolicyParams-shaped vector."""
    grad_w = np.zeros_like(params.label_weights)
    grad_psi = 0.0
    total = 0.0
    phi = params.fidelity
    dphi = phi * (1.0 - phi)
    for g in groups:
        label_logp, claim_logp = group_logprobs(params, g.query, g.labels, g.claims)
        logp = label_logp + claim_logp.sum(axis=1)
        loss, weights = grpo.grpo_objective(logp, g.ref_logp, g.advantages, beta)
        total += loss
        probs = np.exp(_log_softmax(params.label_weights @ g.query.features))
        # sum_i weight_i * (onehot(label_i) - probs), outer features
        coeff = -weights.sum() * probs
        np.add.at(coeff, g.labels, weights)
        grad_w += np.outer(coeff, g.query.features)
        for s, n_cat in enumerate(SLOT_SIZES):
            hit = (g.claims[:, s] == g.query.true_slots[s]).astype(np.float64)
            dlogp = (hit - 1.0 / n_cat) * dphi / np.exp(claim_logp[:, s])
            grad_psi += float(np.dot(weights, dlogp))
    n = len(groups)
    vec = np.concatenate([grad_w.ravel(), [grad_psi]]) / n
    return total / n, vec


def make_loss_function(template: ToyPolicyParams, groups: Sequence[SampledGroup], beta: float) -> Callable:
    """Vector-in loss function for finite-difference checking."""

    def f(vec):
        return batch_loss_and_gradient(template.from_vector(vec), groups, beta)

    return f


# -- training loop ------------------------------------------------------------


@dataclass(frozen=True)
class TrainingConfig:
    seed: int = 0
    steps: int = 2000
    batch_queries: int = 4
    noise_eps: float = 0.05
    emotions: tuple = DEFAULT_EMOTIONS
    group_size: int = 8
    kl_coefficient: float = 0.04
    learning_rate: float = 0.1
    std_floor: float = 1e-8
    alpha_f: float = 0.3
    alpha_o: float = 1.0
    alpha_t: float = 0.5
    reasoning_weights: tuple = (0.25, 0.25, 0.25, 0.25)
    gate_window: int = 20
    gate_threshold: float = 0.5
    progressive: bool = True
    trust_enabled: bool = True
    adversarial: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps: must be >= 1")
        if self.batch_queries < 1:
            raise ValueError("batch_queries: must be >= 1")
        if not 0.0 <= self.noise_eps <= 1.0:
            raise ValueError("noise_eps: must lie in [0, 1]")
        if self.gate_window < 1:
            raise ValueError("gate_window: must be >= 1")
        if not 0.0 <= self.gate_threshold <= 1.0:
            raise ValueError("gate_threshold: must lie in [0, 1]")
        try:
            self.grpo_config()
        except ValueError as exc:
            raise ValueError(f"{_grpo_key(str(exc))}: {exc}") from None
        try:
            self.reward_weights()
        except ValueError as exc:
            raise ValueError(f"alpha: {exc}") from None
        try:
            ReasoningWeights(tuple(self.reasoning_weights))
        except ValueError as exc:
            raise ValueError(f"w1..w4: {exc}") from None
        try:
            self.table()
        except ValueError as exc:
            raise ValueError(f"emotions: {exc}") from None

    def grpo_config(self) -> grpo.GrpoConfig:
        return grpo.GrpoConfig(self.group_size, self.kl_coefficient, self.learning_rate, std_floor=self.std_floor)

    def reward_weights(self) -> RewardWeights:
        return RewardWeights(self.alpha_f, self.alpha_o, self.alpha_t)

    def table(self) -> PrototypeTable:
        return PrototypeTable.for_emotions(self.emotions)

    def replace(self, **changes) -> "TrainingConfig":
        return dataclasses.replace(self, **changes)


def _grpo_key(message: str) -> str:
    for key in ("group_size", "kl_coefficient", "learning_rate"):
        if key in message:
            return key
    return "grpo"


@dataclass(frozen=True)
class MetricsRow:
    step: int
    accuracy: float
    mean_reward: float
    tau_mean: float
    gate_open: int
    kl: float
    loss: float
    fidelity_phi: float
    reasoning_term: float = 0.0

    CSV_FIELDS = ("step", "accuracy", "mean_reward", "tau_mean", "gate_open", "kl", "loss", "fidelity_phi")


@dataclass
class TrainingResult:
    config: TrainingConfig
    rows: List[MetricsRow]
    params: ToyPolicyParams
    reference: ToyPolicyParams

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def final_accuracy(self, window: int = 200) -> float:
        return float(self.column("accuracy")[-window:].mean())

    def gate_step(self) -> Optional[int]:
        for r in self.rows:
            if r.gate_open:
                return r.step
        return None

    def mean_tau_post_gate(self) -> Optional[float]:
        taus = [r.tau_mean for r in self.rows if r.gate_open]
        return float(np.mean(taus)) if taus else None


Scorer = Callable[[ToyResponse, ToyQuery], CriterionScores]


def run_training(config: TrainingConfig = TrainingConfig(), scorer: Optional[Scorer] = None, callback=None) -> TrainingResult:
    """Train the toy policy with GRPO and the progressive trust-aware reward.

    ``scorer`` replaces the mock reward model when given. Each step uses the
    gate as it stood at the start of the step, then advances the schedule
    with the step's batch accuracy. RNG streams are derived from
    (seed, step) for data and (seed, step, query) for rollouts.
    """
    table = config.table()
    gcfg = config.grpo_config()
    alpha = config.reward_weights()
    w = ReasoningWeights(tuple(config.reasoning_weights))
    if scorer is None:
        def scorer(resp, query):
            return mock_rm_score(resp, query, table, config.adversarial)

    params = ToyPolicyParams.zeros(len(table))
    reference = ToyPolicyParams(params.label_weights.copy(), params.fidelity_logit)
    schedule = ScheduleState(config.gate_window, config.gate_threshold, gate_open=not config.progressive)
    rows = []
    for step in range(config.steps):
        queries = generate_dataset([config.seed, 0, step], config.batch_queries, config.noise_eps, table)
        groups = []
        correct = rewards = taus = kls = terms = 0.0
        n_rollouts = 0
        for q_idx, query in enumerate(queries):
            rng = np.random.default_rng([config.seed, 1, step, q_idx])
            responses = sample_group(params, query, gcfg.group_size, rng, table)
            scores = [scorer(r, query) for r in responses]
            result = score_group(
                query.gold_label,
                [r.rendered_text for r in responses],
                scores,
                w,
                alpha,
                schedule,
                config.trust_enabled,
            )
            composite = np.array([rec.composite for rec in result.records])
            adv = grpo.group_advantages(composite, gcfg.std_floor)
            labels = np.array([table.emotions.index(r.label) for r in responses])
            claims = np.array([r.claims for r in responses])
            ref_label, ref_claims = group_logprobs(reference, query, labels, claims)
            ref_logp = ref_label + ref_claims.sum(axis=1)
            logp = np.array([r.total_logprob for r in responses])
            groups.append(SampledGroup(query, labels, claims, adv, ref_logp))

            correct += sum(rec.outcome_reward for rec in result.records)
            rewards += composite.sum()
            taus += result.trust.tau
            kls += float(np.sum(grpo.kl_k3(logp, ref_logp)))
            terms += sum(result.reasoning_terms)
            n_rollouts += len(responses)

        loss, grad = batch_loss_and_gradient(params, groups, gcfg.kl_coefficient)
        accuracy = correct / n_rollouts
        rows.append(
            MetricsRow(
                step=step,
                accuracy=accuracy,
                mean_reward=float(rewards / n_rollouts),
                tau_mean=taus / len(queries),
                gate_open=int(schedule.gate_open),
                kl=kls / n_rollouts,
                loss=float(loss),
                fidelity_phi=params.fidelity,
                reasoning_term=terms / n_rollouts,
            )
        )
        if callback is not None:
            callback(rows[-1], params)
        params = grpo.apply_gradient(params, grad, gcfg.learning_rate)
        schedule = update_schedule(schedule, accuracy)
    return TrainingResult(config, rows, params, reference)
