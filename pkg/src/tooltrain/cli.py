"""Batch front-end.

Subcommands: ``score`` (reward JSONL of generation/ground-truth records),
``kd`` (divergence losses over a logits file), ``gradcheck`` (finite-
difference suite), ``train-toy`` (run the toy trainer), ``advantages``
(group-relative advantages for reward groups).

Exit status contract: 0 all records processed and checks passed, 1
validation failures, 2 I/O or file-format errors. Record streams are JSONL,
time-series logs are CSV, and numbers are serialized in shortest round-trip
decimal form, so repeated runs on the same inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import divergence as dv
from . import gradcheck
from .chat_format import ToolSchema
from .grpo import ZeroVariance, standardize_advantages
from .reward import MalformedGroundTruth, total_reward
from .toy_task import load_task
from .toy_trainer import KD_LOSS_KINDS, ToyTrainConfig, train_sim_rl

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

KD_FILE_VERSION = 1


def _read_jsonl(path: str) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    records = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{n}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ValueError(f"{path}:{n}: expected a JSON object per line")
        records.append(obj)
    return records


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def _write_lines(path: str | None, lines: list[str]) -> None:
    text = "".join(line + "\n" for line in lines)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_schema_ref(ref, base_schema: ToolSchema | None) -> ToolSchema:
    if ref is None:
        if base_schema is None:
            raise ValueError("record has no schema_ref and no --schema was given")
        return base_schema
    if isinstance(ref, str):
        return ToolSchema.from_json(Path(ref).read_text(encoding="utf-8"))
    return ToolSchema.from_dict(ref)


def cmd_score(args: argparse.Namespace) -> int:
    try:
        records = _read_jsonl(args.input)
        base_schema = None
        if args.schema:
            base_schema = ToolSchema.from_json(
                Path(args.schema).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    seen_ids = set()
    out_lines = []
    totals = []
    failures = 0
    for record in records:
        rid = record.get("id")
        if rid in seen_ids:
            print(f"error: duplicate record id {rid!r}", file=sys.stderr)
            return EXIT_IO
        seen_ids.add(rid)
        try:
            schema = _load_schema_ref(record.get("schema_ref"), base_schema)
            breakdown = total_reward(record["generation"],
                                     record["ground_truth"], schema)
        except MalformedGroundTruth as exc:
            failures += 1
            print(f"record {rid!r}: {exc}", file=sys.stderr)
            out_lines.append(_dump({"id": rid, "error": str(exc)}))
            continue
        except (OSError, KeyError, ValueError) as exc:
            print(f"error: record {rid!r}: {exc}", file=sys.stderr)
            return EXIT_IO
        totals.append(breakdown.total)
        out_lines.append(_dump({"id": rid, **breakdown.to_dict()}))

    _write_lines(args.output, out_lines)
    mean = float(np.mean(totals)) if totals else float("nan")
    print(f"scored {len(totals)} of {len(records)} records, "
          f"mean total reward {mean!r}", file=sys.stderr)
    return EXIT_VALIDATION if failures else EXIT_OK


def _kd_loss_report(kind: str, teacher: dv.TopKDistribution, z: np.ndarray,
                    m: int, lam: float) -> dv.LossReport:
    if kind == "fkl":
        return dv.fkl_topk(teacher, z)
    if kind == "rkl":
        return dv.rkl_topk_masked(teacher, z)
    if kind == "rkl-stab":
        return dv.rkl_topk_stabilized(teacher, z, m, lam)
    return dv.ckd_loss(teacher, z, m, lam)


def cmd_kd(args: argparse.Namespace) -> int:
    try:
        rows = _read_jsonl(args.input)
        if not rows or "vocab_size" not in rows[0]:
            raise ValueError("first line must be a header with 'vocab_size'")
        header, records = rows[0], rows[1:]
        vocab_size = int(header["vocab_size"])
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    k_cap = args.k
    m = args.m if args.m is not None else dv.default_truncation(vocab_size)[1]
    out_lines = []
    losses, escapes, entropies = [], [], []
    failures = 0
    for record in records:
        pid = record.get("position_id")
        try:
            topk = record["teacher_topk"]
            indices = np.asarray(topk["indices"], dtype=np.int64)
            probs = np.asarray(topk["probs"], dtype=np.float64)
            if k_cap is not None:
                indices, probs = indices[:k_cap], probs[:k_cap]
            z = np.asarray(record["student_logits"], dtype=np.float64)
            if z.size != vocab_size:
                raise ValueError(f"student_logits has length {z.size}, "
                                 f"header declares {vocab_size}")
            if indices.size and int(indices.max()) >= vocab_size:
                raise ValueError(f"teacher index {int(indices.max())} out of "
                                 f"bounds for vocab_size {vocab_size}")
            teacher = dv.TopKDistribution(indices=indices, probs=probs)
        except (KeyError, ValueError, IndexError) as exc:
            print(f"error: position {pid!r}: {exc}", file=sys.stderr)
            return EXIT_IO
        try:
            report = _kd_loss_report(args.loss, teacher, z, m, args.lambda_tail)
        except (dv.DegenerateStudent, dv.DegenerateTeacher) as exc:
            failures += 1
            print(f"position {pid!r}: {exc}", file=sys.stderr)
            out_lines.append(_dump({"position_id": pid, "error": str(exc)}))
            continue
        losses.append(report.loss)
        escapes.append(report.aux["escape_mass"])
        entropies.append(report.aux["entropy"])
        out_lines.append(_dump({
            "position_id": pid,
            "loss": report.loss,
            "escape_mass": report.aux["escape_mass"],
            "entropy": report.aux["entropy"],
        }))

    footer = {
        "records": len(losses),
        "mean_loss": float(np.mean(losses)) if losses else float("nan"),
        "mean_escape_mass": float(np.mean(escapes)) if escapes else float("nan"),
        "mean_entropy": float(np.mean(entropies)) if entropies else float("nan"),
    }
    out_lines.append(_dump(footer))
    _write_lines(args.output, out_lines)
    return EXIT_VALIDATION if failures else EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.trials == 0:
        print("warning: 0 trials requested; the check is vacuous", file=sys.stderr)
        print("gradcheck: vacuous pass (0 trials)")
        return EXIT_OK
    results = gradcheck.run_gradient_suite(
        seed=args.seed, trials=args.trials, vocab_size=args.dims,
        k=args.k if args.k is not None else 8,
        m=args.m if args.m is not None else 16,
        lambda_tail=args.lambda_tail)
    ok = True
    for name, result in results.items():
        status = "ok" if result.passed else "FAIL"
        ok = ok and result.passed
        print(f"{name:9s} instances={result.instances} "
              f"max_rel_err={result.max_rel_err:.3e} "
              f"max_grad_sum={result.max_grad_sum:.3e} "
              f"boundary_rejected={result.rejected} {status}")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_train_toy(args: argparse.Namespace) -> int:
    try:
        task = load_task(args.task)
        cfg_data = {}
        if args.config:
            cfg_data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        iterations = int(cfg_data.pop("iterations", 500))
        if args.epsilon is not None:
            cfg_data["epsilon"] = args.epsilon
        if args.beta is not None:
            cfg_data["beta"] = args.beta
        cfg = ToyTrainConfig.from_dict(cfg_data)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    _, log = train_sim_rl(task, cfg, iterations, seed=args.seed)
    if args.output:
        log.to_csv(args.output)
    final = log.trailing_mean_reward(50)
    print(f"final mean reward (trailing 50): {final!r}")
    return EXIT_OK


def cmd_advantages(args: argparse.Namespace) -> int:
    try:
        records = _read_jsonl(args.input)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    out_lines = []
    for record in records:
        pid = record.get("prompt_id")
        rewards = record.get("rewards")
        if not isinstance(rewards, list) or len(rewards) < 2:
            print(f"error: group {pid!r} needs at least two rewards",
                  file=sys.stderr)
            return EXIT_VALIDATION
        try:
            adv = standardize_advantages(rewards)
        except ZeroVariance:
            out_lines.append(_dump({"prompt_id": pid, "filtered": True}))
            continue
        out_lines.append(_dump({"prompt_id": pid, "advantages": adv.tolist()}))
    _write_lines(args.output, out_lines)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tooltrain",
        description="Reward scoring, distillation losses, and GRPO utilities "
                    "for function-calling generations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score generation/ground-truth records")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", help="schema JSON used when a record has no schema_ref")
    p.add_argument("--output", help="output JSONL path (default stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("kd", help="evaluate a distillation loss per position")
    p.add_argument("--input", required=True)
    p.add_argument("--loss", choices=list(KD_LOSS_KINDS), default="ckd")
    p.add_argument("--k", type=int, help="cap the teacher entries used per record")
    p.add_argument("--m", type=int, help="student top-m size (default min(100, vocab))")
    p.add_argument("--lambda", dest="lambda_tail", type=float,
                   default=dv.DEFAULT_LAMBDA_TAIL)
    p.add_argument("--output", help="output JSONL path (default stdout)")
    p.set_defaults(func=cmd_kd)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--dims", type=int, default=32, help="vocabulary size")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--lambda", dest="lambda_tail", type=float,
                   default=dv.DEFAULT_LAMBDA_TAIL)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train-toy", help="train the toy policy on a task file")
    p.add_argument("--task", required=True)
    p.add_argument("--config", help="JSON config (iterations plus trainer fields)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, help="clip range override")
    p.add_argument("--beta", type=float, help="KL coefficient override")
    p.add_argument("--output", help="TrainLog CSV path")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("advantages", help="standardize rewards per group")
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="output JSONL path (default stdout)")
    p.set_defaults(func=cmd_advantages)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
