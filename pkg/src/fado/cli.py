"""Command line entry point.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or arguments.
Every command writes its outputs plus manifest.json into paths.output_dir.
"""
import argparse
import csv
import io
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import pipeline
from .config import ConfigError, load_config
from .corpus import (MISSING, SEEKER, SUPPORTER, Utterance, corpus_stats, dump_corpus, split_ids,
                     truncate_history, write_rejection_report)
from .emotion import LexiconEmotionScorer
from .feedback import compute_corpus_means
from .io import atomic_write_json, atomic_write_text, write_manifest
from .metrics import N_INTERVALS, strategy_distribution
from .model import load_checkpoint
from .strategies import STRATEGY_NAMES, strategy_id
from .training import train

log = logging.getLogger("fado")

# config key each path flag writes to
PATH_FLAGS = {
    "corpus": "paths.corpus",
    "schema": "paths.schema",
    "splits": "paths.splits",
    "dictionary": "paths.dictionary",
    "checkpoint": "paths.checkpoint",
    "predictions": "paths.predictions",
    "input": "paths.input",
    "out": "paths.output_dir",
}

REQUIRED_PATHS = {
    "ingest": ("corpus",),
    "split": ("corpus",),
    "train": ("corpus",),
    "generate": ("checkpoint",),
    "evaluate": ("corpus", "predictions"),
    "analyze-feedback": ("corpus",),
    "analyze-distribution": ("corpus",),
}


def distribution_csv(matrix):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["interval"] + list(STRATEGY_NAMES))
    for i, row in enumerate(matrix):
        w.writerow([f"{i}/{N_INTERVALS}-{i + 1}/{N_INTERVALS}"] + [repr(float(x)) for x in row])
    return buf.getvalue()


def _split_subset(cfg, convs, which):
    if which == "all":
        return convs
    train_c, dev_c, test_c = pipeline.make_splits(convs, cfg)
    return {"train": train_c, "dev": dev_c, "test": test_c}[which]


# -- commands -----------------------------------------------------------------

def cmd_ingest(cfg, args, out):
    report = []
    convs = pipeline.load_conversations(cfg, report)
    dump_corpus(convs, out / "corpus.json")
    write_rejection_report(report, out / "rejections.jsonl")
    stats = corpus_stats(convs)
    atomic_write_json(out / "stats.json", stats.to_dict())
    print(json.dumps({"conversations": stats.n_dialogues, "utterances": stats.n_utterances,
                      "rejected": sum(r["status"] == "rejected" for r in report)}))


def cmd_split(cfg, args, out):
    convs = pipeline.load_conversations(cfg)
    splits = pipeline.make_splits(convs, cfg)
    atomic_write_json(out / "splits.json", split_ids(splits))
    print(json.dumps({name: len(p) for name, p in zip(("train", "dev", "test"), splits)}))


def cmd_train(cfg, args, out):
    model, examples, means, _ = pipeline.prepare_training(cfg)
    if not examples["train"]:
        raise ValueError("training split yields no examples")
    records = train(examples["train"], model, cfg.train, out_dir=out / "checkpoints")
    atomic_write_json(out / "corpus_means.json", means.to_dict())
    last = records[-1]
    print(json.dumps({"steps": last["step"], "loss": last["loss"], "strategy_acc": last["strategy_acc"]}))


def cmd_generate(cfg, args, out):
    model, _ = load_checkpoint(cfg.paths.checkpoint)
    if args.batch:
        convs = pipeline.load_conversations(cfg)
        subset = _split_subset(cfg, convs, args.split)
        examples = pipeline.build_examples(subset, None, None, cfg)
        records = pipeline.predict_examples(model, examples, cfg.decode, trace=args.debug)
        atomic_write_text(out / "predictions.jsonl", "".join(json.dumps(r) + "\n" for r in records))
        print(json.dumps({"predictions": len(records)}))
        return
    if not cfg.paths.input:
        raise ConfigError("generate needs --input (a dialog history JSON) or --batch")
    with open(cfg.paths.input) as f:
        history = json.load(f)
    if isinstance(history, dict):
        history = history.get("dialog") or history.get("history") or []
    if not history:
        raise ValueError("empty dialog history")
    utts = []
    for i, turn in enumerate(history):
        speaker = SUPPORTER if turn.get("speaker") in ("supporter", "sys") else SEEKER
        name = turn.get("strategy") or (turn.get("annotation") or {}).get("strategy")
        strategy = (strategy_id(name) if name else strategy_id("Others")) if speaker == SUPPORTER else None
        utts.append(Utterance(speaker, turn.get("content") or turn.get("text") or "", i, strategy))
    utts = truncate_history(utts, cfg.corpus.max_history_tokens)
    trace = [] if args.debug else None
    strategy, tokens = model.respond([u.tokens for u in utts],
                                     [u.strategy for u in utts if u.speaker == SUPPORTER], cfg.decode, trace=trace)
    result = {
        "predicted_strategy": STRATEGY_NAMES[strategy],
        "response_text": " ".join(model.vocab.decode(tokens)),
        "token_ids": tokens,
    }
    if args.debug:
        result["nucleus_sizes"] = trace
    atomic_write_json(out / "generation.json", result)
    print(json.dumps(result))


def cmd_evaluate(cfg, args, out):
    convs = pipeline.load_conversations(cfg)
    subset = _split_subset(cfg, convs, args.split)
    gold = pipeline.build_examples(subset, None, None, cfg)
    with open(cfg.paths.predictions) as f:
        preds = [json.loads(line) for line in f if line.strip()]
    model = load_checkpoint(cfg.paths.checkpoint)[0] if cfg.paths.checkpoint else None
    report, gold_dist = pipeline.evaluate_predictions(preds, gold, model)
    atomic_write_json(out / "eval_report.json", report.to_dict())
    atomic_write_text(out / "distribution.csv", distribution_csv(report.distribution))
    atomic_write_text(out / "distribution_gold.csv", distribution_csv(gold_dist))
    summary = {"acc": report.acc, "ppl": report.ppl, "rouge_l": report.rouge_l,
               **{f"bleu_{n}": v for n, v in report.bleu.items()},
               **{f"distinct_{n}": v for n, v in report.distinct.items()}}
    print(json.dumps(summary))


def cmd_analyze_feedback(cfg, args, out):
    convs = pipeline.load_conversations(cfg)
    subset = _split_subset(cfg, convs, args.split)
    train_c = _split_subset(cfg, convs, "train") if cfg.paths.splits else subset
    means = compute_corpus_means(train_c)
    scorer = LexiconEmotionScorer(cfg.encoder.emotion_dim, seed=cfg.encoder.seed)
    examples = pipeline.build_examples(subset, scorer, means, cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["conversation_id", "example_index", "delta_e", "delta_r", "delta_c", "delta_s"])
    for ex in examples:
        fb = ex.feedback
        w.writerow([ex.conv_id, ex.target.index, repr(fb.delta_e), repr(fb.delta_r), repr(fb.delta_c), repr(fb.delta_s)])
    atomic_write_text(out / "feedback.csv", buf.getvalue())

    stats = corpus_stats(subset)
    ratings = Counter(u.rating for c in subset for u in c.utterances if u.speaker == SEEKER and u.rating is not None)
    hist = {
        "stress_change": {str(k): v for k, v in stats.stress_change_histogram.items()},
        "negative_stress_fraction": stats.negative_stress_fraction,
        "relevance": _score_hist(c.survey.relevance for c in subset),
        "empathy": _score_hist(c.survey.empathy for c in subset),
        "user_rating": {str(k): ratings[k] for k in sorted(ratings)},
        "delta_s_positive": sum(ex.feedback.delta_s >= 0 for ex in examples),
        "delta_s_negative": sum(ex.feedback.delta_s < 0 for ex in examples),
        "corpus_means": means.to_dict(),
    }
    atomic_write_json(out / "feedback_histograms.json", hist)
    print(json.dumps({"examples": len(examples), "negative_stress_fraction": stats.negative_stress_fraction}))


def _score_hist(values):
    c = Counter(values)
    return {("missing" if k == MISSING else str(k)): c[k] for k in sorted(c)}


def cmd_analyze_distribution(cfg, args, out):
    convs = pipeline.load_conversations(cfg)
    subset = _split_subset(cfg, convs, args.split)
    examples = pipeline.build_examples(subset, None, None, cfg)
    if cfg.paths.predictions:
        with open(cfg.paths.predictions) as f:
            by_id = {r["id"]: r for r in map(json.loads, filter(str.strip, f))}
        pairs = [(ex.progress, strategy_id(by_id[ex.id]["predicted_strategy"])) for ex in examples if ex.id in by_id]
    else:
        pairs = [(ex.progress, ex.strategy) for ex in examples]
    matrix = strategy_distribution([p for p, _ in pairs], [s for _, s in pairs])
    atomic_write_text(out / "distribution.csv", distribution_csv(matrix))
    print(distribution_csv(matrix), end="")


COMMANDS = {
    "ingest": cmd_ingest,
    "split": cmd_split,
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "analyze-feedback": cmd_analyze_feedback,
    "analyze-distribution": cmd_analyze_distribution,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fado", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON file with dotted keys")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--seed", type=int, help="seed for splitting, initialization, training and sampling")
        for flag in PATH_FLAGS:
            p.add_argument(f"--{flag}")
        p.add_argument("--split", choices=("train", "dev", "test", "all"), default="test" if name in (
            "evaluate", "generate") else "all")
        p.add_argument("--batch", action="store_true", help="generate: predict for every example of --split")
        p.add_argument("--debug", action="store_true", help="generate: include per-step nucleus sizes")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args):
    overrides = list(args.set)
    for flag, key in PATH_FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            overrides.append(f"{key}={json.dumps(val)}")
    if args.seed is not None:
        for key in ("train.seed", "decode.seed", "encoder.seed"):
            overrides.append(f"{key}={args.seed}")
    cfg = load_config(args.config, overrides)
    for flag in REQUIRED_PATHS[args.command]:
        path = getattr(cfg.paths, flag)
        if not path:
            raise ConfigError(f"{args.command} needs --{flag}")
    for flag in ("corpus", "schema", "splits", "dictionary", "checkpoint", "predictions", "input"):
        path = getattr(cfg.paths, flag)
        if path and not Path(path).exists():
            raise ConfigError(f"--{flag} {path} does not exist")
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f"fado: configuration error: {e}", file=sys.stderr)
        return 2
    out = Path(cfg.paths.output_dir)
    try:
        COMMANDS[args.command](cfg, args, out)
    except ConfigError as e:
        print(f"fado: configuration error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - reported as exit code 1
        if args.verbose:
            log.exception("command failed")
        print(f"fado: {args.command} failed: {e}", file=sys.stderr)
        return 1
    write_manifest(out, args.command, cfg.flat(), cfg.train.seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
