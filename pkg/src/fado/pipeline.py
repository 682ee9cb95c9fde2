"""Glue between the corpus, the model and the metrics, shared by the CLI and demos."""
import dataclasses
import json
from pathlib import Path

from .corpus import extract_examples, load_corpus, load_schema, split_corpus
from .emotion import LexiconEmotionScorer
from .feedback import compute_corpus_means, compute_feedback
from .generator import DecodingConfig
from .metrics import evaluate, perplexity_from_nll, strategy_distribution
from .model import FADOModel, ModelConfig
from .strategies import STRATEGY_NAMES, strategy_id
from .stratdict import StrategyDictionary
from .text import Vocab, tokenize
from .training import evaluate_features, prepare_features


def load_conversations(cfg, report=None):
    schema = load_schema(cfg.paths.schema) if cfg.paths.schema else {}
    schema.setdefault("missing_strategy", cfg.corpus.missing_strategy)
    return load_corpus(cfg.paths.corpus, schema, fail_fast=cfg.corpus.fail_fast, report=report)


def read_splits(path):
    with open(path) as f:
        return json.load(f)


def make_splits(convs, cfg):
    official = read_splits(cfg.paths.splits) if cfg.paths.splits else None
    return split_corpus(convs, cfg.corpus.ratios(), seed=cfg.train.seed, official=official)


def load_dictionary(cfg):
    return StrategyDictionary.load(cfg.paths.dictionary) if cfg.paths.dictionary else StrategyDictionary.default()


def build_vocab(train_convs, dictionary, max_size=8000):
    """Vocabulary from the training split plus the strategy descriptions."""
    return Vocab.build(
        (u.tokens for c in train_convs for u in c.utterances),
        max_size=max_size,
        extra=[dictionary.tokens(k) for k in range(len(STRATEGY_NAMES))],
    )


def build_examples(convs, scorer, corpus_means, cfg):
    a = cfg.ablation
    out = []
    for conv in convs:
        exs = extract_examples(conv, cfg.corpus.max_history_tokens, scorer, corpus_means=corpus_means,
                               mu=cfg.train.mu, conversation_mode=cfg.corpus.conversation_mode)
        if a.no_tl_feedback or a.no_cl_feedback:
            for ex in exs:
                ex.feedback = compute_feedback(
                    conv, ex.target.index, scorer, corpus_means=corpus_means, mu=cfg.train.mu,
                    conversation_mode=cfg.corpus.conversation_mode,
                    use_turn=not a.no_tl_feedback, use_conversation=not a.no_cl_feedback)
        out.extend(exs)
    return out


def model_config(cfg, vocab_size):
    enc = dataclasses.replace(cfg.encoder, vocab_size=vocab_size)
    return ModelConfig(
        encoder=enc,
        flow=cfg.flow(),
        mlp_layers=cfg.model.mlp_layers,
        dictionary_mode=cfg.dictionary_mode(),
        use_strategy_history=not cfg.ablation.no_strategy_history,
        use_emotion=not cfg.ablation.no_emotion,
    )


def prepare_training(cfg):
    """Load the corpus and return everything train() needs.

    Vocabulary and survey means come from the training split only.
    """
    report = []
    convs = load_conversations(cfg, report)
    train_c, dev_c, test_c = make_splits(convs, cfg)
    if not train_c:
        raise ValueError("empty training split")
    dictionary = load_dictionary(cfg)
    vocab = build_vocab(train_c, dictionary, cfg.corpus.vocab_size)
    scorer = LexiconEmotionScorer(cfg.encoder.emotion_dim, seed=cfg.encoder.seed)
    means = compute_corpus_means(train_c)
    model = FADOModel(model_config(cfg, len(vocab)), vocab, dictionary, scorer)
    examples = {
        "train": build_examples(train_c, scorer, means, cfg),
        "dev": build_examples(dev_c, scorer, means, cfg),
        "test": build_examples(test_c, scorer, means, cfg),
    }
    return model, examples, means, report


def predict_examples(model, examples, decoding, trace=False):
    """Predicted strategy and sampled response for each example."""
    records = []
    for i, ex in enumerate(examples):
        steps = [] if trace else None
        dec = dataclasses.replace(decoding, seed=decoding.seed + i)
        strategy, tokens = model.respond([u.tokens for u in ex.history], ex.strategy_history, dec, trace=steps)
        rec = {
            "id": ex.id,
            "predicted_strategy": STRATEGY_NAMES[strategy],
            "text": " ".join(model.vocab.decode(tokens)),
            "token_ids": tokens,
        }
        if trace:
            rec["nucleus_sizes"] = steps
        records.append(rec)
    return records


def evaluate_predictions(pred_records, gold_examples, model=None):
    """EvalReport for predictions matched to gold examples by id.

    Perplexity needs a model; without one it is reported as NaN.
    """
    by_id = {r["id"]: r for r in pred_records}
    missing = [ex.id for ex in gold_examples if ex.id not in by_id]
    if missing:
        raise ValueError(f"no prediction for {len(missing)} gold examples, e.g. {missing[:3]}")
    preds = [strategy_id(by_id[ex.id]["predicted_strategy"]) for ex in gold_examples]
    gold = [ex.strategy for ex in gold_examples]
    hyps = [tokenize(by_id[ex.id]["text"]) for ex in gold_examples]
    refs = [ex.target.tokens for ex in gold_examples]
    progress = [ex.progress for ex in gold_examples]
    ppl = float("nan")
    if model is not None:
        _, nll, n_tok = evaluate_features(model, prepare_features(gold_examples, model))
        ppl = perplexity_from_nll(nll, n_tok)
    report = evaluate(preds, gold, hyps, refs, progress, ppl)
    gold_dist = strategy_distribution(progress, gold)
    return report, gold_dist
