"""Command-line entry points: annotate, score, train, report.

Exit codes: 0 success, 1 nothing produced, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from . import config as cfg
from .dsp import AudioBuffer
from .prosody import AnnotationError, WordAlignment, annotate
from .reward import (
    CriterionScores,
    ReasoningWeights,
    RewardWeights,
    ScheduleState,
    canonicalize_label,
    score_group,
)
from .toyenv import MetricsRow, run_training

log = logging.getLogger("ptrlab")

EXIT_OK, EXIT_EMPTY, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


# -- annotate -------------------------------------------------------------------


def read_wav(path) -> AudioBuffer:
    """Read mono PCM WAV (16-bit int or 32-bit float) scaled to [-1, 1]."""
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"unsupported channels: {data.shape[1]} (mono required)")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported sample format {data.dtype}")
    return AudioBuffer(samples, float(rate))


def _wav_inputs(path: Path):
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() == ".wav")
    return [path]


def load_alignments(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                words = [WordAlignment(w["word"], float(w["t_start"]), float(w["t_end"])) for w in row.get("words", [])]
                out[str(row["id"])] = (row.get("transcript", " ".join(w.word for w in words)), words, row.get("speaker_traits"))
            except (ValueError, KeyError, TypeError) as exc:
                raise UsageError(f"{path}:{lineno}: bad alignment row ({exc})") from None
    return out


def cmd_annotate(args) -> int:
    analysis = cfg.analysis_config(cfg.load_config(args.config) if args.config else None)
    alignments = load_alignments(args.alignments) if args.alignments else {}
    written = 0
    lines = []
    for wav in _wav_inputs(Path(args.input)):
        utt_id = wav.stem
        try:
            audio = read_wav(wav)
        except (ValueError, OSError) as exc:
            log.warning("%s: skipped at stage read: %s", wav.name, exc)
            continue
        transcript, words, traits = alignments.get(utt_id, ("", [], None))
        try:
            ann = annotate(audio, transcript, words, traits, analysis)
        except AnnotationError as exc:
            log.warning("%s: skipped at stage %s: %s", wav.name, exc.stage, exc.cause)
            continue
        lines.append(dumps({"id": utt_id, **ann.to_dict()}))
        written += 1
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.writelines(line + "\n" for line in lines)
    return EXIT_OK if written else EXIT_EMPTY


# -- score ------------------------------------------------------------------------


def group_key(row: dict, field: str = None) -> str:
    if field:
        return str(row.get(field))
    rid = str(row["id"])
    return rid.rsplit("#", 1)[0] if "#" in rid else rid


def _read_scoring_rows(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                if not isinstance(row, dict):
                    raise ValueError("row is not a JSON object")
                for key in ("id", "gold_label", "response"):
                    if key not in row:
                        raise ValueError(f"missing field {key!r}")
                if canonicalize_label(row["gold_label"]) is None:
                    raise ValueError(f"gold_label {row['gold_label']!r} is not a known emotion")
                scores = row.get("criterion_scores")
                row["_scores"] = CriterionScores.from_dict(scores) if scores is not None else None
            except (ValueError, TypeError) as exc:
                raise UsageError(f"line {lineno}: {exc}") from None
            rows.append(row)
    return rows


def _parse_weights(text):
    try:
        return ReasoningWeights(tuple(float(x) for x in text.split(",")))
    except ValueError as exc:
        raise UsageError(f"--weights: {exc}") from None


def cmd_score(args) -> int:
    rows = _read_scoring_rows(args.responses)
    try:
        alpha = RewardWeights(args.alpha_f, args.alpha_o, args.alpha_t)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    w = _parse_weights(args.weights)
    state = ScheduleState(gate_open=args.gate == "open")

    groups = {}
    for i, row in enumerate(rows):
        groups.setdefault(group_key(row, args.group_by), []).append(i)
    results = [None] * len(rows)
    for key, members in groups.items():
        golds = {canonicalize_label(rows[i]["gold_label"]) for i in members}
        if len(golds) != 1:
            raise UsageError(f"group {key!r} mixes gold labels")
        res = score_group(
            golds.pop(),
            [rows[i]["response"] for i in members],
            [rows[i]["_scores"] for i in members],
            w,
            alpha,
            state,
        )
        for i, rec in zip(members, res.records):
            results[i] = {
                "id": rows[i]["id"],
                "R_f": rec.format_reward,
                "R_o": rec.outcome_reward,
                "R_t": rec.reasoning_reward,
                "tau": res.trust.tau,
                "R_i": rec.composite,
            }
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.writelines(dumps(r) + "\n" for r in results)
    return EXIT_OK if results else EXIT_EMPTY


# -- train ------------------------------------------------------------------------


def write_metrics(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MetricsRow.CSV_FIELDS)
        for r in rows:
            # repr of a Python float round-trips exactly; numpy scalars repr differently
            writer.writerow(
                [int(r.step)]
                + [repr(float(getattr(r, name))) for name in ("accuracy", "mean_reward", "tau_mean")]
                + [int(r.gate_open)]
                + [repr(float(getattr(r, name))) for name in ("kl", "loss", "fidelity_phi")]
            )


def cmd_train(args) -> int:
    raw = cfg.load_config(args.config) if args.config else {}
    config = cfg.training_config(raw, seed=args.seed)
    result = run_training(config)
    write_metrics(args.out, result.rows)
    tau = result.mean_tau_post_gate()
    print(f"final-window accuracy: {result.final_accuracy():.4f}")
    print(f"gate-open step: {result.gate_step() if result.gate_step() is not None else 'never'}")
    print(f"mean tau post-gate: {tau:.4f}" if tau is not None else "mean tau post-gate: n/a")
    return EXIT_OK


# -- report -----------------------------------------------------------------------


def read_metrics(path):
    """Load a metrics CSV into a dict of arrays, validating its schema."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != MetricsRow.CSV_FIELDS:
                raise UsageError(f"{path}: unexpected header {header}")
            data = []
            for lineno, rec in enumerate(reader, 2):
                if len(rec) != len(header):
                    raise UsageError(f"{path}:{lineno}: expected {len(header)} columns")
                data.append([float(x) for x in rec])
    except (OSError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not data:
        raise UsageError(f"{path}: no metric rows")
    cols = {name: np.array(col) for name, col in zip(header, np.array(data).T)}
    if np.any(np.diff(cols["step"]) <= 0):
        raise UsageError(f"{path}: step column is not strictly increasing")
    if np.any(np.diff(cols["gate_open"]) < 0):
        raise UsageError(f"{path}: gate_open column decreases")
    return cols


def summarize(cols, window: int = 200) -> dict:
    opened = np.flatnonzero(cols["gate_open"] > 0)
    return {
        "final_accuracy": float(cols["accuracy"][-window:].mean()),
        "gate_step": int(cols["step"][opened[0]]) if opened.size else None,
        "mean_reward": float(cols["mean_reward"].mean()),
    }


def cmd_report(args) -> int:
    summaries = [(p, summarize(read_metrics(p), args.window)) for p in args.metrics]
    print(f"{'file':<40} {'final_acc':>10} {'gate_step':>10} {'mean_reward':>12}")
    for path, s in summaries:
        gate = "never" if s["gate_step"] is None else str(s["gate_step"])
        print(f"{str(path):<40} {s['final_accuracy']:>10.4f} {gate:>10} {s['mean_reward']:>12.4f}")
    if len(summaries) == 2:
        diff = summaries[0][1]["final_accuracy"] - summaries[1][1]["final_accuracy"]
        print(f"{'difference (first - second)':<40} {diff:>+10.4f}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptrlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="prosody annotation of WAV files")
    p.add_argument("--input", required=True, help="WAV file or directory of WAVs")
    p.add_argument("--alignments", help="JSONL of {id, words: [{word, t_start, t_end}], speaker_traits}")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("score", help="offline group scoring of responses")
    p.add_argument("--responses", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha-f", type=float, default=0.3)
    p.add_argument("--alpha-o", type=float, default=1.0)
    p.add_argument("--alpha-t", type=float, default=0.5)
    p.add_argument("--weights", default="0.25,0.25,0.25,0.25")
    p.add_argument("--gate", choices=("open", "closed"), default="open")
    p.add_argument("--group-by", default=None, help="row field to group on (default: id prefix before '#')")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="run the toy GRPO training harness")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="summarize metrics CSVs")
    p.add_argument("--metrics", nargs="+", required=True)
    p.add_argument("--window", type=int, default=200)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, cfg.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
