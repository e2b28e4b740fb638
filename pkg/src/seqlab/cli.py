"""Command-line entry point.

Subcommands: convert, gen, loss, train, train-mt, eval, report.  All file
outputs are written atomically (temp file + rename); exit codes are 0 on
success, 1 for usage errors, 2 for validation/parse errors, 3 for runtime
failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import datagen, meanteacher, metrics, trainer
from .ctc import CtcPosteriorgram, ctc_loss
from .ctl import Posteriorgram, ctl_loss
from .errors import ParseError, SeqlabError, ValidationError
from .labels import (SequentialLabel, Vocabulary, read_annotations,
                     strong_to_sequential, strong_to_weak)
from .model import ToyModel
from .trainer import TrainConfig, write_jsonl

LABEL_COMBOS = ["strong", "weak", "seq", "strong+weak", "strong+seq",
                "weak+seq", "strong+weak+seq"]


def _verbose():
    return bool(os.environ.get("SEQLAB_VERBOSE"))


def _note(msg):
    if _verbose():
        print(msg, file=sys.stderr)


def combo_name(weights: dict) -> str:
    parts = []
    if weights.get("w_strong"):
        parts.append("strong")
    if weights.get("w_weak"):
        parts.append("weak")
    if weights.get("w_seq"):
        parts.append("seq")
    return "+".join(parts)


# --------------------------------------------------------------------------
# subcommands

def cmd_convert(args) -> int:
    vocab = Vocabulary.from_json(args.vocab)
    anns = read_annotations(args.infile, vocab)
    records = []
    for clip in anns:
        rec = {"clip": clip,
               "sequential": strong_to_sequential(anns[clip]).to_strings()}
        if args.weak:
            rec["weak"] = sorted(k.name for k in strong_to_weak(anns[clip]).classes)
        records.append(rec)
    write_jsonl(args.out, records)
    _note(f"wrote {len(records)} clips to {args.out}")
    return 0


def cmd_gen(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            spec = datagen.GenSpec.from_dict(json.load(f))
    else:
        spec = datagen.GenSpec()
    if args.seed is not None:
        spec.seed = args.seed
    clips = datagen.generate(spec, args.n)
    datagen.save_dataset(args.out, spec, clips)
    _note(f"wrote {len(clips)} clips to {args.out}")
    return 0


def _load_sequential(path, vocab) -> SequentialLabel:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if isinstance(data, dict):
        data = data["sequential"]
    return SequentialLabel.from_strings(data, vocab)


def cmd_loss(args) -> int:
    vocab = Vocabulary.from_json(args.vocab)
    post = np.load(args.post)
    target = _load_sequential(args.labels, vocab)
    if args.kind == "ctc":
        result = ctc_loss(CtcPosteriorgram(post), target)
    else:
        result = ctl_loss(Posteriorgram(post, args.hop), target)
    print(json.dumps({"kind": args.kind, "loss": result.loss}))
    if args.grad_out:
        np.save(args.grad_out, result.grad)
    return 0


def _train_config(args, cls):
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            cfg = cls.from_dict(json.load(f))
    else:
        cfg = cls()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_train(args) -> int:
    cfg = _train_config(args, TrainConfig)
    spec, clips = datagen.load_dataset(args.data)
    eval_clips = None
    if args.eval_data:
        _, eval_clips = datagen.load_dataset(args.eval_data)
    vocab = spec.vocabulary()
    model = ToyModel(spec.n_features, spec.n_classes, cfg.hidden,
                     seed=cfg.seed, ctc_head=(cfg.seq_kind == "ctc"),
                     window=cfg.window)
    model, log = trainer.train(model, clips, cfg, vocab, eval_clips)
    records = [{"kind": "config", "config": cfg.to_dict(),
                "combo": combo_name(cfg.to_dict()["weights"])}]
    records += [{"kind": "epoch", **r} for r in log]
    write_jsonl(args.out, records)
    if args.ckpt:
        model.save(args.ckpt)
    return 0


def cmd_train_mt(args) -> int:
    cfg = _train_config(args, meanteacher.MeanTeacherConfig)
    spec, labeled = datagen.load_dataset(args.labeled)
    unlabeled = []
    if args.unlabeled:
        _, unlabeled = datagen.load_dataset(args.unlabeled)
    eval_clips = None
    if args.eval_data:
        _, eval_clips = datagen.load_dataset(args.eval_data)
    vocab = spec.vocabulary()
    model = ToyModel(spec.n_features, spec.n_classes, cfg.hidden,
                     seed=cfg.seed, ctc_head=False, window=cfg.window)
    teacher, log = meanteacher.train_semisupervised(
        model, labeled, unlabeled, cfg, vocab, eval_clips)
    records = [{"kind": "config", "config": cfg.to_dict(),
                "combo": combo_name(cfg.to_dict()["weights"])}] + log
    write_jsonl(args.out, records)
    if args.ckpt:
        teacher.save(args.ckpt)
    return 0


def cmd_eval(args) -> int:
    vocab = Vocabulary.from_json(args.vocab)
    refs = read_annotations(args.ref, vocab)
    preds = read_annotations(args.pred, vocab)
    results = []
    from .labels import StrongAnnotation
    for clip in sorted(set(refs) | set(preds)):
        results.append(metrics.ClipResult(
            preds.get(clip, StrongAnnotation([])),
            refs.get(clip, StrongAnnotation([]))))
    seg = metrics.segment_fscore(results, args.segment)
    ev = metrics.event_fscore(results, args.collar, args.offset_ratio)
    out = {"segment": seg.to_dict(), "event": ev.to_dict(),
           "peak_cluster": metrics.peak_cluster_score(results)}
    print(json.dumps(out, sort_keys=True))
    return 0


def _final_metrics(records) -> dict | None:
    last = None
    for r in records:
        if r.get("kind") == "epoch" and "segment_f1" in r:
            last = r
    return last


def aggregate_runs(paths) -> dict[str, dict]:
    """Group run logs by label combination; median final F-scores per
    group, with failed/missing runs marked."""
    by_combo: dict[str, dict] = {
        c: {"runs": 0, "failed": 0, "event_f1": [], "segment_f1": []}
        for c in LABEL_COMBOS}
    for path in paths:
        records = trainer.read_jsonl(path)
        combo = None
        for r in records:
            if r.get("kind") == "config":
                combo = r.get("combo")
        if combo not in by_combo:
            by_combo.setdefault(combo or "unknown",
                                {"runs": 0, "failed": 0,
                                 "event_f1": [], "segment_f1": []})
        row = by_combo[combo or "unknown"]
        row["runs"] += 1
        final = _final_metrics(records)
        if final is None:
            row["failed"] += 1
        else:
            row["event_f1"].append(final["event_f1"])
            row["segment_f1"].append(final["segment_f1"])
    out = {}
    for combo, row in by_combo.items():
        out[combo] = {
            "runs": row["runs"],
            "failed": row["failed"],
            "median_event_f1": (float(np.median(row["event_f1"]))
                                if row["event_f1"] else None),
            "median_segment_f1": (float(np.median(row["segment_f1"]))
                                  if row["segment_f1"] else None),
        }
    return out


def cmd_report(args) -> int:
    table = aggregate_runs(args.runs)
    if args.json:
        print(json.dumps(table, sort_keys=True))
        return 0
    header = f"{'labels':<18} {'runs':>4} {'failed':>6} {'event-F':>9} {'seg-F':>9}"
    print(header)
    print("-" * len(header))
    for combo in LABEL_COMBOS + sorted(set(table) - set(LABEL_COMBOS)):
        row = table[combo]
        ev = "  missing" if row["median_event_f1"] is None else f"{row['median_event_f1']:9.4f}"
        sg = "  missing" if row["median_segment_f1"] is None else f"{row['median_segment_f1']:9.4f}"
        print(f"{combo:<18} {row['runs']:>4} {row['failed']:>6} {ev} {sg}")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqlab")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convert", help="strong TSV -> sequential/weak labels")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--vocab", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--weak", action="store_true",
                   help="include weak labels in the output records")
    c.set_defaults(func=cmd_convert)

    c = sub.add_parser("gen", help="generate a synthetic dataset")
    c.add_argument("--out", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--config", help="GenSpec JSON")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_gen)

    c = sub.add_parser("loss", help="compute a loss on stored posteriors")
    c.add_argument("--kind", choices=["ctc", "ctl"], required=True)
    c.add_argument("--post", required=True, help=".npy posteriorgram")
    c.add_argument("--labels", required=True,
                   help="JSON sequential label (array of onset:/offset: strings)")
    c.add_argument("--vocab", required=True)
    c.add_argument("--hop", type=float, default=1.0)
    c.add_argument("--grad-out")
    c.set_defaults(func=cmd_loss)

    c = sub.add_parser("train", help="supervised training")
    c.add_argument("--data", required=True)
    c.add_argument("--eval-data")
    c.add_argument("--config", help="TrainConfig JSON")
    c.add_argument("--seed", type=int)
    c.add_argument("--out", required=True, help="JSON-lines log")
    c.add_argument("--ckpt", help="checkpoint path prefix")
    c.set_defaults(func=cmd_train)

    c = sub.add_parser("train-mt", help="mean-teacher semi-supervised training")
    c.add_argument("--labeled", required=True)
    c.add_argument("--unlabeled")
    c.add_argument("--eval-data")
    c.add_argument("--config", help="MeanTeacherConfig JSON")
    c.add_argument("--seed", type=int)
    c.add_argument("--out", required=True)
    c.add_argument("--ckpt")
    c.set_defaults(func=cmd_train_mt)

    c = sub.add_parser("eval", help="score predictions against references")
    c.add_argument("--ref", required=True)
    c.add_argument("--pred", required=True)
    c.add_argument("--vocab", required=True)
    c.add_argument("--segment", type=float, default=metrics.SEGMENT_S)
    c.add_argument("--collar", type=float, default=metrics.ONSET_COLLAR_S)
    c.add_argument("--offset-ratio", type=float, default=metrics.OFFSET_RATIO)
    c.set_defaults(func=cmd_eval)

    c = sub.add_parser("report", help="aggregate multi-seed run logs")
    c.add_argument("--runs", nargs="+", required=True)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_report)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        return args.func(args)
    except (ValidationError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SeqlabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (OSError, RuntimeError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
