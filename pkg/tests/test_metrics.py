import itertools
import math
import random

import numpy as np
import pytest
from scipy.stats import chisquare

from fado.metrics import (
    bleu_n,
    corpus_rouge_l,
    distinct_n,
    evaluate,
    lcs_length,
    perplexity,
    rouge_l,
    strategy_accuracy,
    strategy_distribution,
)

ALPHABET = "abc"
SEQS = [list(s) for n in range(1, 6) for s in itertools.product(ALPHABET, repeat=n)]


# -- naive oracles ----------------------------------------------------------

def grams(seq, n):
    out = []
    for i in range(len(seq)):
        if i + n <= len(seq):
            out.append(tuple(seq[i:i + n]))
    return out


def oracle_bleu(hyps, refs, n):
    logs = 0.0
    for k in range(1, n + 1):
        num = den = 0
        for h, r in zip(hyps, refs):
            hg, rg = grams(h, k), grams(r, k)
            for g in set(hg):
                num += min(hg.count(g), rg.count(g))
            den += len(hg)
        if num == 0:
            return 0.0
        logs += math.log(num / den)
    c = sum(map(len, hyps))
    r = sum(map(len, refs))
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * math.exp(logs / n)


def oracle_lcs(a, b):
    best = 0
    for k in range(1, min(len(a), len(b)) + 1):
        for idx in itertools.combinations(range(len(a)), k):
            sub = [a[i] for i in idx]
            it = iter(b)
            if all(x in it for x in sub):
                best = k
    return best


def oracle_rouge(h, r):
    lcs = oracle_lcs(h, r)
    if not lcs:
        return 0.0
    p, rc = lcs / len(h), lcs / len(r)
    return 2 * p * rc / (p + rc)


# -- worked cases -----------------------------------------------------------

def test_bleu_worked():
    assert bleu_n([list("abc")], [list("abd")], 2) == pytest.approx(math.sqrt(1 / 3), abs=1e-4)
    assert bleu_n([list("abcd")], [list("abcd")], 4) == 1.0
    assert bleu_n([list("aaa")], [list("bbb")], 2) == 0.0


def test_rouge_worked():
    assert rouge_l(list("abcd"), list("acd")) == pytest.approx(0.8571, abs=1e-4)
    assert lcs_length(list("abcd"), list("acd")) == 3
    assert rouge_l(list("ab"), list("ab")) == 1.0
    assert rouge_l(list("ab"), list("cd")) == 0.0
    with pytest.raises(ValueError):
        rouge_l([], list("a"))


def test_distinct_worked():
    assert distinct_n([list("aab")], 1) == pytest.approx(2 / 3)
    assert distinct_n([list("abcd")], 1) == 1.0
    assert distinct_n([list("ab"), list("ab")], 2) == 0.5


def test_accuracy_and_ppl():
    assert strategy_accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert strategy_accuracy([0, 0], [1, 1]) == 0.0
    assert strategy_accuracy([0] * 8, [0, 0, 1, 1, 1, 1, 1, 1]) == 0.25
    assert perplexity(np.full(7, -math.log(13))) == pytest.approx(13)
    assert perplexity([0.0, 0.0]) == 1.0
    lp = [-0.1, -2.0, -0.7]
    assert perplexity(lp) == pytest.approx(math.exp(sum(-x for x in lp) / 3), rel=1e-15)
    with pytest.raises(ValueError):
        perplexity([])


def test_distribution_bucketing():
    m = strategy_distribution([0.0] * 5, [0, 1, 2, 3, 4])
    assert np.allclose(m[0], [0.2] * 5 + [0] * 3)
    assert not m[1:].any()
    m = strategy_distribution([1.0, 0.99, 1 / 6], [7, 6, 5])
    assert m[5, 7] == 0.5 and m[5, 6] == 0.5 and m[1, 5] == 1.0


def test_distribution_uniform():
    rng = np.random.default_rng(0)
    n = 100_000
    prog, strat = rng.random(n), rng.integers(0, 8, n)
    m = strategy_distribution(prog, strat)
    assert np.all(np.abs(m.sum(axis=1) - 1) < 1e-9)
    assert np.abs(m - 1 / 8).max() < 0.02
    counts = np.bincount(strat[np.minimum((prog * 6).astype(int), 5) == 0], minlength=8)
    assert chisquare(counts).pvalue > 0.001


# -- exhaustive equivalence over short sequences ----------------------------

@pytest.mark.slow
def test_pairwise_exhaustive():
    for h in SEQS:
        for r in SEQS:
            for n in (2, 3, 4):
                assert bleu_n([h], [r], n) == oracle_bleu([h], [r], n)
            assert rouge_l(h, r) == oracle_rouge(h, r)


def test_single_sequence_exhaustive():
    for s in SEQS:
        for n in (1, 2):
            g = grams(s, n)
            if g:
                assert distinct_n([s], n) == len(set(g)) / len(g)


def test_corpus_level_random_against_oracles():
    rng = random.Random(0)
    for _ in range(300):
        k = rng.randint(1, 4)
        hyps = [rng.choice(SEQS) for _ in range(k)]
        refs = [rng.choice(SEQS) for _ in range(k)]
        for n in (2, 3, 4):
            assert bleu_n(hyps, refs, n) == pytest.approx(oracle_bleu(hyps, refs, n), rel=1e-12, abs=0)
        assert corpus_rouge_l(hyps, refs) == pytest.approx(
            sum(oracle_rouge(h, r) for h, r in zip(hyps, refs)) / k, rel=1e-12)
        perm = list(range(k))
        rng.shuffle(perm)
        assert bleu_n([hyps[i] for i in perm], [refs[i] for i in perm], 2) == pytest.approx(bleu_n(hyps, refs, 2))


def test_evaluate_self_comparison():
    refs = [list("abca"), list("bcab"), list("ccab")]
    rep = evaluate([1, 2, 3], [1, 2, 0], refs, refs, [0.1, 0.5, 0.9])
    assert rep.bleu == {2: 1.0, 3: 1.0, 4: 1.0}
    assert rep.rouge_l == 1.0
    assert rep.acc == pytest.approx(2 / 3)
    for v in [rep.acc, rep.rouge_l, *rep.bleu.values(), *rep.distinct.values()]:
        assert 0 <= v <= 1
    assert math.isnan(rep.ppl)
