"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``. The training
ablations share a session-scoped cache of runs (about 12 runs of 2000
steps, a couple of minutes in total).
"""

import math

import numpy as np
import pytest

from ptrlab import cli, dsp, grpo, reward, synth, toyenv
from ptrlab.reward import CriterionScores, ScheduleState
from ptrlab.toyenv import TrainingConfig

SEEDS = (0, 1, 2)


class RunCache:
    def __init__(self):
        self._runs = {}

    def get(self, **changes):
        key = tuple(sorted(changes.items()))
        if key not in self._runs:
            self._runs[key] = toyenv.run_training(TrainingConfig().replace(**changes))
        return self._runs[key]


@pytest.fixture(scope="session")
def runs():
    return RunCache()


# -- 1 ------------------------------------------------------------------------


def test_criterion_1_reward_algebra(acceptance_report):
    r_t = reward.reasoning_reward(CriterionScores(3, 4, 2, 5))
    tau = reward.trust_weight([(1, 0.4), (0, 0.6)]).tau
    alpha = reward.RewardWeights(alpha_f=0.3, alpha_o=1.0, alpha_t=0.5)
    total = reward.composite_reward(1, 1, 0.7, 1.0, alpha, gate_open=True)
    ok = abs(r_t - 0.7) <= 1e-6 and abs(tau - 0.818731) <= 1e-6 and abs(total - 1.65) <= 1e-6
    acceptance_report(1, ok, f"R_t={r_t:.9f} tau={tau:.9f} R_i={total:.9f}")
    assert ok


# -- 2 ------------------------------------------------------------------------


def test_criterion_2_trust_and_gate(acceptance_report):
    rng = np.random.default_rng(2024)
    n_cases = 10_000
    failures = []
    for case in range(n_cases):
        k = int(rng.integers(1, 17))
        outcomes = rng.integers(0, 2, k)
        if case % 10 == 0:
            outcomes[:] = outcomes[0]  # force an empty partition side
        r_t = rng.integers(1, 6, (k, 4))
        records = [(int(o), reward.reasoning_reward(CriterionScores(*map(int, g)))) for o, g in zip(outcomes, r_t)]
        stats = reward.trust_weight(records)
        if not 0 < stats.tau <= 1:
            failures.append(("range", case))
        one_sided = stats.mean_correct is None or stats.mean_wrong is None
        if (one_sided or stats.mean_correct >= stats.mean_wrong) and stats.tau != 1.0:
            failures.append(("branch", case))
        # a strict shrink is only observable once the gap exceeds rounding
        if not one_sided and stats.mean_wrong - stats.mean_correct > 1e-12 and not stats.tau < 1.0:
            failures.append(("shrink", case))

        # gate latch over an arbitrary accuracy stream
        state = ScheduleState(int(rng.integers(1, 30)), float(rng.random()))
        history = []
        for acc in rng.random(int(rng.integers(1, 60))) ** rng.uniform(0.2, 3):
            state = reward.update_schedule(state, float(acc))
            history.append(state.gate_open)
        if history != sorted(history):
            failures.append(("latch", case))

        # pre-gate the reasoning term contributes exactly 0
        labels = rng.choice(["Sad", "Happy", "Angry", "Neutral"], k)
        texts = [f"<think>t</think><answer>{lab}</answer>" if rng.random() > 0.2 else lab for lab in labels]
        scores = [CriterionScores(*map(int, g)) for g in r_t]
        res = reward.score_group("Sad", texts, scores, state=ScheduleState())
        base = [0.3 * r.format_reward + 1.0 * r.outcome_reward for r in res.records]
        if res.reasoning_terms != (0.0,) * k or [r.composite for r in res.records] != base:
            failures.append(("pre-gate", case))
    ok = not failures
    acceptance_report(2, ok, f"{n_cases} random cases, {len(failures)} violations")
    assert ok, failures[:5]


# -- 3 ------------------------------------------------------------------------


def test_criterion_3_advantages(acceptance_report):
    rng = np.random.default_rng(7)
    n_groups = 10_000
    worst = {"mean": 0.0, "std": 0.0, "shift": 0.0, "scale": 0.0}
    degenerate_ok = True
    for i in range(n_groups):
        k = int(rng.integers(2, 17))
        if i % 20 == 0:
            rewards = np.full(k, rng.normal())
            degenerate_ok &= bool(np.all(grpo.group_advantages(rewards) == 0))
            continue
        rewards = rng.normal(0, rng.uniform(0.1, 3), k)
        a = grpo.group_advantages(rewards)
        worst["mean"] = max(worst["mean"], abs(a.mean()))
        worst["std"] = max(worst["std"], abs(a.std() - 1))
        c, s = rng.uniform(-5, 5), rng.uniform(0.1, 10)
        worst["shift"] = max(worst["shift"], np.max(np.abs(grpo.group_advantages(rewards + c) - a)))
        worst["scale"] = max(worst["scale"], np.max(np.abs(grpo.group_advantages(rewards * s) - a)))
    ok = (
        degenerate_ok
        and worst["mean"] <= 1e-9
        and worst["std"] <= 1e-6
        and worst["shift"] <= 1e-6
        and worst["scale"] <= 1e-6
    )
    detail = ", ".join(f"max {k} err {v:.2e}" for k, v in worst.items())
    acceptance_report(3, ok, f"{n_groups} groups K in [2,16]; {detail}; degenerate zeros {degenerate_ok}")
    assert ok


# -- 4 ------------------------------------------------------------------------


def test_criterion_4_gradient(acceptance_report):
    table = toyenv.PrototypeTable.for_emotions()
    errors = []
    for point in range(3):
        rng = np.random.default_rng(100 + point)
        params = toyenv.ToyPolicyParams(rng.normal(0, 1.0, (4, toyenv.N_FEATURES)), float(rng.normal(0, 1.5)))
        reference = toyenv.ToyPolicyParams.zeros(4)
        groups = []
        for q in toyenv.generate_dataset(point, 4, 0.05, table):
            resp = toyenv.sample_group(params, q, 8, rng, table)
            labels = np.array([table.emotions.index(r.label) for r in resp])
            claims = np.array([r.claims for r in resp])
            lab, cl = toyenv.group_logprobs(reference, q, labels, claims)
            adv = grpo.group_advantages(rng.normal(size=8))
            groups.append(toyenv.SampledGroup(q, labels, claims, adv, lab + cl.sum(axis=1)))
        f = toyenv.make_loss_function(params, groups, beta=0.04)
        errors.append(grpo.finite_difference_check(params.to_vector(), f, epsilon=1e-5, probe_count=24, seed=point))
    ok = max(errors) <= 1e-4
    acceptance_report(4, ok, "max rel error per point " + ", ".join(f"{e:.2e}" for e in errors) + " (24 probes each)")
    assert ok


# -- 5 ------------------------------------------------------------------------


def test_criterion_5_dsp(acceptance_report):
    kernel_err = float(np.max(np.abs(dsp.savgol_coefficients(5, 2) - np.array([-3, 12, 17, 12, -3]) / 35)))
    y = np.arange(21.0) ** 2
    quad_err = float(np.max(np.abs(dsp.savgol_smooth(y, 5, 2)[2:-2] - y[2:-2])))
    pitch_err = 0.0
    for freq in range(80, 401, 10):
        frame = synth.tone(freq, 0.04).samples
        f0, _ = dsp.estimate_f0(frame, 16000, 80, 400)
        pitch_err = max(pitch_err, abs(f0 - freq) / freq)
    n = 1600
    rms_err = abs(dsp.rms_energy(np.sin(2 * np.pi * 10 * np.arange(n) / n)) - 1 / math.sqrt(2))
    ok = kernel_err <= 1e-9 and quad_err <= 1e-9 and pitch_err <= 0.02 and rms_err <= 1e-4
    acceptance_report(
        5, ok, f"kernel {kernel_err:.1e}, quadratic {quad_err:.1e}, pitch 80-400 Hz max {pitch_err:.2%}, rms {rms_err:.1e}"
    )
    assert ok


# -- 6 ------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_6_convergence(runs, acceptance_report):
    result = runs.get(seed=0)
    acc = result.final_accuracy(200)
    gate = result.gate_step()
    ok = acc >= 0.90 and gate is not None and gate < 1000
    acceptance_report(6, ok, f"final-200 accuracy {acc:.4f}, gate opened at step {gate}")
    assert ok


# -- 7 ------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_7_trust_ablation(runs, acceptance_report):
    held = 0
    parts = []
    for seed in SEEDS:
        trusted = runs.get(seed=seed, adversarial=True)
        untrusted = runs.get(seed=seed, adversarial=True, trust_enabled=False)
        clean = runs.get(seed=seed)
        tau_adv = trusted.mean_tau_post_gate()
        tau_clean = clean.mean_tau_post_gate()
        pair_ok = (
            trusted.final_accuracy() >= untrusted.final_accuracy()
            and tau_adv is not None
            and tau_adv < 1
            and tau_clean is not None
            and tau_clean >= 0.95
        )
        held += pair_ok
        parts.append(
            f"seed {seed}: acc {trusted.final_accuracy():.4f} vs {untrusted.final_accuracy():.4f}, "
            f"tau adv {tau_adv:.3f} clean {tau_clean:.4f} [{'ok' if pair_ok else 'no'}]"
        )
    ok = held >= 2
    acceptance_report(7, ok, f"{held}/3 pairs; " + "; ".join(parts))
    assert ok


# -- 8 ------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_8_progressive_ablation(runs, acceptance_report):
    held = 0
    parts = []
    for seed in SEEDS:
        progressive = runs.get(seed=seed).final_accuracy()
        always_on = runs.get(seed=seed, progressive=False).final_accuracy()
        held += always_on <= progressive
        parts.append(f"seed {seed}: {progressive:.5f} vs {always_on:.5f}")
    ok = held >= 2
    acceptance_report(8, ok, f"{held}/3 pairs progressive >= always-on; " + "; ".join(parts))
    assert ok


# -- 9 ------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_9_determinism(tmp_path, acceptance_report):
    csvs = []
    for name in ("first.csv", "second.csv"):
        assert cli.main(["train", "--seed", "0", "--out", str(tmp_path / name)]) == 0
        csvs.append((tmp_path / name).read_bytes())

    audio = tmp_path / "audio"
    audio.mkdir()
    synth.write_wav(audio / "up.wav", synth.chirp(150, 300))
    synth.write_wav(audio / "down.wav", synth.chirp(300, 150))
    synth.write_wav(audio / "arch.wav", synth.piecewise_glide([(0, 150), (0.5, 300), (1.0, 150)]))
    synth.write_wav(audio / "flat.wav", synth.tone(220, 1.2), float32=True)
    align = tmp_path / "align.jsonl"
    align.write_text(
        '{"id": "arch", "words": [{"word": "really", "t_start": 0.05, "t_end": 0.45}, {"word": "now", "t_start": 0.5, "t_end": 0.95}]}\n'
        '{"id": "up", "words": [{"word": "yes", "t_start": 0.1, "t_end": 0.9}], "speaker_traits": {"gender": "male", "age_group": "adult"}}\n'
        '{"id": "down", "words": [{"word": "fine", "t_start": 0.0, "t_end": 0.5}, {"word": "then", "t_start": 0.55, "t_end": 1.0}]}\n'
        '{"id": "flat", "words": [{"word": "a", "t_start": 0.1, "t_end": 0.3}, {"word": "b", "t_start": 0.4, "t_end": 0.6}, {"word": "c", "t_start": 0.7, "t_end": 1.1}]}\n'
    )
    jsonls = []
    for name in ("a.jsonl", "b.jsonl"):
        assert cli.main(["annotate", "--input", str(audio), "--alignments", str(align), "--out", str(tmp_path / name)]) == 0
        jsonls.append((tmp_path / name).read_bytes())
    ok = csvs[0] == csvs[1] and jsonls[0] == jsonls[1] and jsonls[0].count(b"\n") == 4
    acceptance_report(9, ok, f"CSV identical {csvs[0] == csvs[1]} ({len(csvs[0])} bytes), JSONL identical {jsonls[0] == jsonls[1]}")
    assert ok


# -- 10 -----------------------------------------------------------------------

FORMAT_CORPUS = [
    # valid
    ("<think>low pitch, slow pace</think><answer>Sad</answer>", 1),
    ("<think></think><answer>Happy</answer>", 1),
    ("<think>x</think><answer></answer>", 1),
    ("  <think>a</think>\n<answer>Angry</answer>\n", 1),
    ("<think>multi\nline\nreasoning</think>\n\n<answer>Neutral</answer>", 1),
    ("<think>pitch is high; energy is high</think>\t<answer> Angry </answer>", 1),
    ("<think>uses < and > signs</think><answer>Fear</answer>", 1),
    ("<think>a</think><answer>not an emotion</answer>", 1),
    # reordered
    ("<answer>Sad</answer><think>x</think>", 0),
    ("</think><think>a<answer>Sad</answer>", 0),
    ("<think>a</think></answer>Sad<answer>", 0),
    ("<answer>Sad</answer>\n<think></think>", 0),
    # duplicated
    ("<think>a</think><think>b</think><answer>Sad</answer>", 0),
    ("<think>a</think><answer>Sad</answer><answer>Happy</answer>", 0),
    ("<think>a</think><answer>Sad</answer><think>b</think><answer>Sad</answer>", 0),
    ("<think><think>a</think></think><answer>Sad</answer>", 0),
    # nested
    ("<think>a<answer>Sad</answer></think>", 0),
    ("<think>a</think><answer><think>b</think>Sad</answer>", 0),
    ("<answer><think>a</think>Sad</answer>", 0),
    # trailing or leading content
    ("<think>a</think><answer>Sad</answer> trailing words", 0),
    ("Answer: <think>a</think><answer>Sad</answer>", 0),
    ("<think>a</think> so <answer>Sad</answer>", 0),
    ("<think>a</think><answer>Sad</answer>.", 0),
    # missing or empty blocks
    ("", 0),
    ("   \n", 0),
    ("<answer>Sad</answer>", 0),
    ("<think>a</think>", 0),
    ("<think></think><answer>", 0),
    ("<Think>a</Think><answer>Sad</answer>", 0),
    ("Sad", 0),
]


def test_criterion_10_format_corpus(acceptance_report):
    assert len(FORMAT_CORPUS) == 30
    expected = [e for _, e in FORMAT_CORPUS]
    got = [reward.format_reward(text) for text, _ in FORMAT_CORPUS]
    mismatches = [i for i, (a, b) in enumerate(zip(got, expected)) if a != b]
    ok = not mismatches
    acceptance_report(10, ok, f"30-case corpus, {sum(expected)} valid, mismatches at {mismatches}")
    assert ok
