"""Automatic evaluation: ACC, PPL, BLEU-n, Distinct-n, ROUGE-L and the
strategy distribution over conversation progress."""
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from .strategies import NUM_STRATEGIES

N_INTERVALS = 6


def _ngrams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def strategy_accuracy(predictions, gold):
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold differ in length")
    if not gold:
        raise ValueError("no predictions to score")
    return sum(int(p) == int(g) for p, g in zip(predictions, gold)) / len(gold)


def perplexity(token_logprobs):
    """exp of the mean negative log-probability over all reference tokens."""
    lp = np.asarray(token_logprobs, dtype=np.float64).ravel()
    if lp.size == 0:
        raise ValueError("perplexity needs at least one token")
    return float(math.exp(-lp.mean()))


def perplexity_from_nll(total_nll, n_tokens):
    if n_tokens <= 0:
        raise ValueError("perplexity needs at least one token")
    return math.exp(total_nll / n_tokens)


def bleu_n(hypotheses, references, n):
    """Corpus BLEU with uniform weights over orders 1..n, no smoothing."""
    if len(hypotheses) != len(references):
        raise ValueError("hypotheses and references differ in length")
    if not hypotheses:
        raise ValueError("no sentence pairs")
    if n < 1:
        raise ValueError("n must be >= 1")
    matches = [0] * n
    totals = [0] * n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for k in range(1, n + 1):
            h = Counter(_ngrams(hyp, k))
            r = Counter(_ngrams(ref, k))
            matches[k - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[k - 1] += max(len(hyp) - k + 1, 0)
    if hyp_len == 0 or any(m == 0 for m in matches):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matches, totals)) / n
    bp = 1.0 if hyp_len >= ref_len else math.exp(1 - ref_len / hyp_len)
    return bp * math.exp(log_p)


def distinct_n(hypotheses, n):
    if not hypotheses:
        raise ValueError("no hypotheses")
    grams = [g for hyp in hypotheses for g in _ngrams(hyp, n)]
    if not grams:
        raise ValueError(f"hypotheses contain no {n}-grams")
    return len(set(grams)) / len(grams)


def lcs_length(a, b):
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(hypothesis, reference):
    """LCS-based F1 of one pair."""
    if not hypothesis or not reference:
        raise ValueError("ROUGE-L needs non-empty sequences")
    lcs = lcs_length(hypothesis, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(hypothesis)
    r = lcs / len(reference)
    return 2 * p * r / (p + r)


def corpus_rouge_l(hypotheses, references):
    if len(hypotheses) != len(references) or not hypotheses:
        raise ValueError("need equally many, non-zero hypotheses and references")
    return sum(rouge_l(h, r) if h else 0.0 for h, r in zip(hypotheses, references)) / len(hypotheses)


def progress_interval(progress, n_intervals=N_INTERVALS):
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress {progress} outside [0, 1]")
    return min(int(progress * n_intervals), n_intervals - 1)


def strategy_distribution(progress, strategies, n_intervals=N_INTERVALS, n_strategies=NUM_STRATEGIES):
    """Row i holds strategy proportions for progress in [i/6, (i+1)/6)
    (the last row also takes progress == 1). Empty rows stay zero."""
    counts = np.zeros((n_intervals, n_strategies))
    for p, s in zip(progress, strategies):
        counts[progress_interval(p, n_intervals), int(s)] += 1
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


@dataclass
class EvalReport:
    acc: float
    ppl: float
    bleu: dict
    distinct: dict
    rouge_l: float
    distribution: list = field(default_factory=list)
    n_examples: int = 0

    def to_dict(self):
        return asdict(self)


def evaluate(predictions, gold, hypotheses, references, progress, ppl=math.nan):
    """Compute every metric for an evaluation set.

    hypotheses/references are token lists; progress gives each example's
    position in its conversation.
    """
    distinct = {}
    for n in (1, 2):
        try:
            distinct[n] = distinct_n(hypotheses, n)
        except ValueError:
            distinct[n] = 0.0
    return EvalReport(
        acc=strategy_accuracy(predictions, gold),
        ppl=ppl,
        bleu={n: bleu_n(hypotheses, references, n) for n in (2, 3, 4)},
        distinct=distinct,
        rouge_l=corpus_rouge_l(hypotheses, references),
        distribution=strategy_distribution(progress, predictions).tolist(),
        n_examples=len(gold),
    )
