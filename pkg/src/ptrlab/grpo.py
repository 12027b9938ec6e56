"""Critic-free group-relative policy optimisation pieces.

Advantages are rewards standardised within a group of K rollouts for the
same query. The objective is the on-policy surrogate with a k3 KL penalty
towards a frozen reference policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 8
    kl_coefficient: float = 0.04
    learning_rate: float = 0.1
    clip_epsilon: float = 0.2
    std_floor: float = 1e-8

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError(f"group_size must be >= 2 (K >= 2), got {self.group_size}")
        if self.kl_coefficient < 0:
            raise ValueError(f"kl_coefficient must be >= 0, got {self.kl_coefficient}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass(frozen=True)
class PolicyUpdateStats:
    mean_reward: float
    mean_advantage_magnitude: float
    kl_estimate: float
    loss: float
    gradient_norm: float


def group_advantages(rewards, std_floor: float = 1e-8) -> np.ndarray:
    """(r - mean) / std with the population std; all zeros if std < std_floor."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or len(r) < 2:
        raise ValueError(f"need a group of at least 2 rewards, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    centered = r - r.mean()
    std = np.sqrt(np.mean(centered ** 2))
    if std < std_floor:
        return np.zeros_like(r)
    return centered / std


def kl_k3(logp, logp_ref):
    """Per-sample k3 estimate exp(d) - d - 1 with d = logp_ref - logp."""
    delta = np.asarray(logp_ref, dtype=np.float64) - np.asarray(logp, dtype=np.float64)
    out = np.expm1(delta) - delta
    return float(out) if np.ndim(out) == 0 else out


def grpo_objective(logp, logp_ref, advantages, beta: float = 0.04):
    """Loss and d(loss)/d(logp_i) for one sampled group.

    loss = -(1/K) sum_i [A_i logp_i - beta * k3(logp_i, logp_ref_i)]

    Advantages and reference log-probs are constants; on-policy, so the
    importance ratio is identically 1 at the sampling point.
    """
    logp = np.atleast_1d(np.asarray(logp, dtype=np.float64))
    logp_ref = np.atleast_1d(np.asarray(logp_ref, dtype=np.float64))
    adv = np.atleast_1d(np.asarray(advantages, dtype=np.float64))
    if logp.size == 0:
        raise ValueError("empty group")
    if not (logp.shape == logp_ref.shape == adv.shape):
        raise ValueError("logp, logp_ref and advantages must have equal shapes")
    k = logp.size
    delta = logp_ref - logp
    kl = np.expm1(delta) - delta
    loss = -np.sum(adv * logp - beta * kl) / k
    weights = -(adv + beta * np.expm1(delta)) / k
    return float(loss), weights


def apply_gradient(params, gradient, learning_rate: float):
    """Plain gradient-descent step; works on arrays or objects exposing
    ``to_vector`` / ``from_vector``."""
    if hasattr(params, "to_vector"):
        vec = params.to_vector()
        grad = gradient.to_vector() if hasattr(gradient, "to_vector") else np.asarray(gradient, dtype=np.float64)
        if grad.shape != vec.shape:
            raise ValueError(f"shape mismatch: params {vec.shape} vs gradient {grad.shape}")
        return params.from_vector(vec - learning_rate * grad)
    p = np.asarray(params, dtype=np.float64)
    g = np.asarray(gradient, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: params {p.shape} vs gradient {g.shape}")
    return p - learning_rate * g


def _loss_only(value):
    return float(value[0]) if isinstance(value, tuple) else float(value)


def finite_difference_check(
    params: np.ndarray,
    loss_function: Callable,
    epsilon: float = 1e-5,
    probe_count: int = 20,
    seed: int = 0,
    analytic_gradient=None,
    return_all: bool = False,
):
    """Compare an analytic gradient with central differences.

    ``loss_function(p)`` returns either ``loss`` or ``(loss, gradient)``;
    in the first case ``analytic_gradient`` must be supplied. Probes
    ``probe_count`` coordinates drawn from a seeded generator (without
    replacement while possible). Relative error per probe is
    |a - n| / max(1e-8, |a| + |n|); returns the maximum, or the per-probe
    ``(indices, errors)`` when ``return_all``.
    """
    params = np.asarray(params, dtype=np.float64)
    if analytic_gradient is None:
        _, analytic_gradient = loss_function(params)
    analytic = np.asarray(analytic_gradient, dtype=np.float64).ravel()
    if analytic.size != params.size:
        raise ValueError("analytic gradient does not match params")
    rng = np.random.default_rng(seed)
    n = params.size
    idx = rng.choice(n, size=probe_count, replace=probe_count > n)
    errors = np.empty(probe_count)
    flat = params.ravel()
    for j, i in enumerate(idx):
        up = flat.copy()
        down = flat.copy()
        up[i] += epsilon
        down[i] -= epsilon
        numeric = (
            _loss_only(loss_function(up.reshape(params.shape)))
            - _loss_only(loss_function(down.reshape(params.shape)))
        ) / (2 * epsilon)
        errors[j] = abs(analytic[i] - numeric) / max(1e-8, abs(analytic[i]) + abs(numeric))
    if return_all:
        return idx, errors
    return float(errors.max())
