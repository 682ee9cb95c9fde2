"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL/SKIP line; the lines are repeated in
the pytest terminal summary. Criterion 8 needs the full ESConv file and
reads its path from FADO_ESCONV_PATH.
"""
import itertools
import math
import os
import time

import numpy as np
import pytest
import torch
from scipy.stats import chisquare

from conftest import StubScorer, central_diff_check, overfit_run, record_criterion, tiny_batch, tiny_model
from fado.corpus import corpus_stats, load_corpus
from fado.dcr import DoubleControlReader, FlowConfig, apply_flows
from fado.dfs import StrategySelector
from fado.feedback import compute_corpus_means, compute_feedback
from fado.generator import DecodingConfig, apply_repetition_penalty, sample_token, softmax
from fado.metrics import (
    bleu_n,
    distinct_n,
    perplexity,
    rouge_l,
    strategy_accuracy,
    strategy_distribution,
)
from fado.training import generation_loss, joint_loss, strategy_loss

from test_generator import brute_nucleus
from test_metrics import SEQS, grams, oracle_bleu, oracle_rouge


def test_criterion_1_gate_flow_identities():
    start = time.perf_counter()
    d, T = 8, 6
    failures = 0
    for seed in range(1000):
        g = torch.Generator().manual_seed(seed)
        torch.manual_seed(seed)
        dcr = DoubleControlReader(d).double()
        c = torch.randn(d, generator=g, dtype=torch.float64) * 3
        o = torch.randn(8, generator=g, dtype=torch.float64) * 3
        H = torch.randn(T, d, generator=g, dtype=torch.float64)
        alpha, beta = torch.rand(2, generator=g, dtype=torch.float64).clamp(min=1e-3).tolist()
        gates = dcr(c, o)
        o0, H0 = apply_flows(o, H, gates, FlowConfig(0.0, 0.0))
        ok = torch.equal(o0, o) and torch.equal(H0, H)
        ok &= bool(torch.all((gates.g_c > 0) & (gates.g_c < 1)) and torch.all((gates.g_o > 0) & (gates.g_o < 1)))
        o_p, H_p = apply_flows(o, H, gates, FlowConfig(alpha, beta))
        rh, ro = H_p / H, o_p / o
        ok &= bool(torch.all((rh > 1 - alpha) & (rh < 1)) and torch.all((ro > 1 - beta) & (ro < 1)))
        failures += not ok
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 60
    record_criterion(1, ok, f"1000 seeded cases, {failures} failures, {elapsed:.1f}s")
    assert ok


def test_criterion_2_gradient_fidelity():
    start = time.perf_counter()
    torch.manual_seed(0)
    d = 8
    sel, dcr = StrategySelector(d).double(), DoubleControlReader(d).double()
    g = torch.Generator().manual_seed(1)
    s, c, r = (torch.randn(3, d, generator=g, dtype=torch.float64) for _ in range(3))
    H = torch.randn(3, 5, d, generator=g, dtype=torch.float64)
    gt, ds = torch.tensor([0, 4, 7]), torch.tensor([0.3, -0.8, 0.0], dtype=torch.float64)

    def head():
        o = sel(s, c, r)
        o_p, H_p = apply_flows(o, H, dcr(c, o), FlowConfig(0.2, 0.2))
        return strategy_loss(o_p, gt, ds).sum() + 0.1 * (H_p ** 2).sum()

    err_head = central_diff_check(head, list(sel.parameters()) + list(dcr.parameters()))

    logits = torch.randn(4, 20, generator=g, dtype=torch.float64, requires_grad=True)
    targets = [3, 17, 0, 9]
    err_gen = central_diff_check(lambda: generation_loss(torch.softmax(logits, -1), targets), [logits])

    model = tiny_model(d=8, vocab_size=20)
    batch = tiny_batch()
    err_model = central_diff_check(lambda: joint_loss(model, batch)["loss"],
                                   [p for p in model.parameters() if p.requires_grad])
    elapsed = time.perf_counter() - start
    worst = max(err_head, err_gen, err_model)
    ok = worst < 1e-4 and elapsed < 120
    record_criterion(2, ok, f"relative errors head {err_head:.1e}, L2 {err_gen:.1e}, "
                            f"full model L1+L2 {err_model:.1e}; {elapsed:.1f}s")
    assert ok


def test_criterion_3_loss_branch_semantics():
    rng = np.random.default_rng(3)
    h = 1e-4
    bad = 0
    for _ in range(100):
        o = rng.normal(size=8) * 2
        gt = int(rng.integers(0, 8))
        bump = o.copy()
        bump[gt] += h
        for ds in (float(rng.uniform(0, 3)), 0.0, float(-rng.uniform(1e-3, 3))):
            before = strategy_loss(torch.tensor(o), gt, ds).item()
            after = strategy_loss(torch.tensor(bump), gt, ds).item()
            bad += not (after < before if ds >= 0 else after > before)
    half = torch.tensor([0.0, 0.0] + [-1e4] * 6, dtype=torch.float64)  # exp underflows to exactly 0
    exact = [strategy_loss(half, 1, ds).item() for ds in (1.0, -1.0)]
    shifted = [strategy_loss(half + 1.5, 1, ds).item() for ds in (1.0, -1.0)]
    ok = bad == 0 and all(v == math.log(2) for v in exact) and all(abs(v - math.log(2)) < 1e-15 for v in shifted)
    record_criterion(3, ok, f"100 instances x 3 feedback signs, {bad} wrong signs; p_gt=0.5 -> {exact}")
    assert ok


def test_criterion_4_overfit():
    start = time.perf_counter()
    records, acc, nll, n = overfit_run(steps=200, seed=13)
    again, acc2, nll2, _ = overfit_run(steps=200, seed=13)
    elapsed = time.perf_counter() - start
    deterministic = records == again and acc == acc2 and nll == nll2
    ok = n == 20 and len(records) == 200 and acc == 1.0 and nll < 0.4 and deterministic and elapsed < 300
    record_criterion(4, ok, f"{n} examples, 200 steps: accuracy {acc:.3f}, L2/token {nll:.4f}, "
                            f"deterministic={deterministic}, {elapsed:.1f}s for two runs")
    assert ok


def test_criterion_5_metric_oracles():
    mismatches = 0
    for hyp, ref in itertools.product(SEQS, SEQS):
        for n in (2, 3, 4):
            mismatches += bleu_n([hyp], [ref], n) != oracle_bleu([hyp], [ref], n)
        mismatches += rouge_l(hyp, ref) != oracle_rouge(hyp, ref)
        for n in (1, 2):
            g = grams(hyp, n) + grams(ref, n)
            if g:
                mismatches += distinct_n([hyp, ref], n) != len(set(g)) / len(g)
        if len(hyp) == len(ref):
            hits = 0
            for a, b in zip(hyp, ref):
                hits += a == b
            mismatches += strategy_accuracy([ord(a) for a in hyp], [ord(b) for b in ref]) != hits / len(ref)
    logp = {"a": math.log(0.5), "b": math.log(0.3), "c": math.log(0.2)}
    for seq in SEQS:
        lp = [logp[t] for t in seq]
        total = 0.0
        for x in lp:
            total += x
        mismatches += perplexity(lp) != math.exp(-total / len(lp))
    b2 = bleu_n([list("abc")], [list("abd")], 2)
    rl = rouge_l(list("abcd"), list("acd"))
    ok = mismatches == 0 and abs(b2 - math.sqrt(1 / 3)) < 1e-4 and abs(rl - 0.8571) < 1e-4
    record_criterion(5, ok, f"{len(SEQS) ** 2} sequence pairs, {mismatches} mismatches; "
                            f"BLEU-2 {b2:.4f}, ROUGE-L {rl:.4f}")
    assert ok


def test_criterion_6_nucleus_sampling():
    rng = np.random.default_rng(6)
    cfg = DecodingConfig()
    outside = 0
    for _ in range(1000):
        logits = rng.normal(size=20) * 3
        generated = [int(x) for x in rng.integers(0, 20, size=4)]
        tok, _ = sample_token(logits, generated, cfg, rng)
        probs = softmax(apply_repetition_penalty(logits / cfg.temperature, generated, cfg.repetition_penalty))
        outside += tok not in brute_nucleus(probs, cfg.top_p)
    p = np.array([0.4, 0.3, 0.2, 0.1])
    raw = DecodingConfig(top_p=1.0, temperature=1.0, repetition_penalty=1.0)
    draw_rng = np.random.default_rng(0)
    n = 100_000
    counts = np.bincount([sample_token(np.log(p), [], raw, draw_rng)[0] for _ in range(n)], minlength=4)
    pval = chisquare(counts, p * n).pvalue
    ok = outside == 0 and pval > 0.01
    record_criterion(6, ok, f"1000 steps, {outside} tokens outside the nucleus; chi-square p = {pval:.3f}")
    assert ok


def test_criterion_7_feedback_pipeline(sample_convs):
    conv = sample_convs[0]
    assert len(conv) == 8
    u = conv.utterances
    scorer = StubScorer({" ".join(u[0].tokens): 0.125, " ".join(u[2].tokens): 0.25,
                         " ".join(u[4].tokens): 0.5, " ".join(u[6].tokens): 0.875})
    means = compute_corpus_means(sample_convs)
    # hand-computed: survey 4 -> 2, relevance 5, empathy 4 gives delta_c = 2.0 everywhere;
    # ratings 3 (u4) and 5 (u6)
    expected = {
        1: (0.0, 0.0, 2.0, 1.0),
        3: (0.125, 0.0, 2.0, 1.125),
        5: (0.25, 0.0, 2.0, 1.25),
        7: (0.375, 0.5, 2.0, 1.875),
    }
    got = {}
    for idx in expected:
        fb = compute_feedback(conv, idx, scorer, corpus_means=means)
        got[idx] = (fb.delta_e, fb.delta_r, fb.delta_c, fb.delta_s)
    combo = all(fb[3] == fb[0] + fb[1] + 0.5 * fb[2] for fb in got.values())
    ok = got == expected and combo
    record_criterion(7, ok, f"targets {sorted(got)}: {got[7]} at the last supporter turn")
    assert ok


def test_criterion_8_esconv_statistics():
    path = os.environ.get("FADO_ESCONV_PATH")
    if not path or not os.path.exists(path):
        record_criterion(8, None, "full ESConv not available (set FADO_ESCONV_PATH)")
        pytest.skip("full ESConv not available")
    stats = corpus_stats(load_corpus(path))
    checks = {
        "dialogues": stats.n_dialogues == 1053,
        "utterances": stats.n_utterances == 31410,
        "supporter": stats.n_supporter == 14855,
        "seeker": stats.n_seeker == 16555,
        "avg length": abs(stats.avg_dialog_length - 29.8) <= 0.1,
        "negative stress": abs(stats.negative_stress_fraction - 0.8846) <= 0.005,
    }
    ok = all(checks.values())
    record_criterion(8, ok, f"{stats.n_dialogues} dialogues, {stats.n_utterances} utterances "
                            f"({stats.n_supporter}/{stats.n_seeker}), avg {stats.avg_dialog_length:.2f}, "
                            f"negative {stats.negative_stress_fraction:.4f}; failed: "
                            f"{[k for k, v in checks.items() if not v]}")
    assert ok


def test_criterion_9_distribution():
    rng = np.random.default_rng(9)
    n = 100_000
    m = strategy_distribution(rng.random(n), rng.integers(0, 8, n))
    row_err = float(np.abs(m.sum(axis=1) - 1).max())
    dev = float(np.abs(m - 1 / 8).max())
    skew = strategy_distribution(rng.random(500) ** 3, rng.integers(0, 8, 500))
    sums = skew.sum(axis=1)
    nonempty_ok = bool(np.all((sums == 0) | (np.abs(sums - 1) < 1e-9)))
    ok = row_err < 1e-9 and dev < 0.02 and nonempty_ok
    record_criterion(9, ok, f"row-sum error {row_err:.1e}, max deviation from 1/8 {dev:.4f}")
    assert ok
