"""Feedback-aware strategy loss, generation loss and the training loop."""
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .model import collate, featurize, save_checkpoint

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 3e-5
    warmup_steps: int = 100
    epochs: int = 3
    batch_size: int = 16
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    grad_clip: Optional[float] = None
    mu: float = 0.5
    alpha: float = 0.2
    beta: float = 0.2
    seed: int = 13
    loss_epsilon: float = 1e-8
    max_steps: Optional[int] = None
    teacher_forcing: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1 or self.warmup_steps < 0:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if not 0 < self.loss_epsilon <= 1e-3:
            raise ValueError("train.loss_epsilon must lie in (0, 1e-3]")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("train.grad_clip must be positive or unset")


def strategy_loss(o_prime, gt, delta_s, eps=1e-8):
    """Per-example feedback-aware NLL.

    delta_s >= 0: -log p_gt ; delta_s < 0: -log max(1 - p_gt, eps),
    with p = softmax(o_prime). Works on a single logit vector or a batch.
    """
    o_prime = torch.as_tensor(o_prime)
    single = o_prime.dim() == 1
    if single:
        o_prime = o_prime.unsqueeze(0)
    if not torch.all(torch.isfinite(o_prime)):
        raise ValueError("non-finite strategy logits")
    gt = torch.as_tensor(gt, dtype=torch.long).reshape(-1)
    delta_s = torch.as_tensor(delta_s, dtype=o_prime.dtype).reshape(-1)
    log_z = torch.logsumexp(o_prime, dim=-1)
    log_p = o_prime.gather(1, gt[:, None]).squeeze(1) - log_z
    # log(1 - p_gt) computed from the other classes to stay accurate near p_gt -> 1
    others = o_prime.scatter(1, gt[:, None], float("-inf"))
    log_not = torch.logsumexp(others, dim=-1) - log_z
    log_not = torch.clamp(log_not, min=math.log(eps))
    loss = torch.where(delta_s >= 0, -log_p, -log_not)
    return loss[0] if single else loss


def generation_loss(step_distributions, targets, reduction="sum"):
    """-sum_z log p(y_z) from explicit per-step distributions.

    `reduction="mean"` returns the per-token value used for perplexity.
    """
    probs = torch.as_tensor(step_distributions)
    targets = torch.as_tensor(targets, dtype=torch.long)
    if probs.shape[0] != targets.shape[0]:
        raise ValueError("need exactly one distribution per target token")
    nll = -torch.log(probs.gather(1, targets[:, None]).squeeze(1)).sum()
    return nll / len(targets) if reduction == "mean" else nll


def token_nll(logits, targets, pad_mask):
    """Per-example summed NLL and token counts from decoder logits."""
    logp = torch.log_softmax(logits, dim=-1)
    picked = logp.gather(2, targets.unsqueeze(-1)).squeeze(-1)
    keep = (~pad_mask).to(picked.dtype)
    return -(picked * keep).sum(dim=1), keep.sum(dim=1)


def joint_loss(model, batch, eps=1e-8, dictionary_strategy=None):
    out = model(batch, dictionary_strategy)
    l1 = strategy_loss(out["o_prime"], batch.strategy, batch.delta_s, eps)
    nll, n_tok = token_nll(out["logits"], batch.decoder_out, batch.decoder_pad)
    out.update(l1=l1, l2=nll, n_tokens=n_tok, loss=l1.mean() + nll.mean())
    return out


def warmup_factor(step, warmup_steps):
    """Linear ramp: update number `step` (1-based) runs at step/warmup of the peak."""
    if warmup_steps <= 0:
        return 1.0
    return min(1.0, step / warmup_steps)


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def prepare_features(examples, model, max_response_tokens=None):
    pos = model.config.encoder.max_positions
    return [featurize(ex, model.vocab, model.scorer, pos, max_response_tokens) for ex in examples]


def train(train_examples, model, cfg, out_dir=None, features=None):
    """Optimize L1 + L2 and return the list of per-step log records.

    With `out_dir`, a checkpoint is written after every epoch and the log
    goes to train_log.jsonl. Raises FloatingPointError on a non-finite loss.
    """
    if not train_examples and not features:
        raise ValueError("empty training split")
    feats = features if features is not None else prepare_features(train_examples, model)
    model.config.flow.alpha = cfg.alpha
    model.config.flow.beta = cfg.beta
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    params = list(model.parameters())
    opt = torch.optim.AdamW(params, lr=cfg.learning_rate, betas=(cfg.adam_beta1, cfg.adam_beta2),
                            eps=cfg.adam_eps, weight_decay=cfg.weight_decay)
    out_dir = Path(out_dir) if out_dir else None
    log_lines = []
    records = []
    step = 0
    done = False
    model.train()
    for epoch in range(1, cfg.epochs + 1):
        for idx in _batches(len(feats), cfg.batch_size, rng):
            step += 1
            lr = cfg.learning_rate * warmup_factor(step, cfg.warmup_steps)
            for g in opt.param_groups:
                g["lr"] = lr
            batch = collate([feats[i] for i in idx])
            out = joint_loss(model, batch, cfg.loss_epsilon,
                             dictionary_strategy=None if cfg.teacher_forcing else "predicted")
            loss = out["loss"]
            if not torch.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at step {step}")
            opt.zero_grad()
            loss.backward()
            if cfg.grad_clip:
                torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
            opt.step()
            pred = torch.argmax(out["o_prime"].detach(), dim=-1)
            rec = {
                "step": step,
                "epoch": epoch,
                "lr": lr,
                "loss": loss.item(),
                "l1": out["l1"].mean().item(),
                "l2": out["l2"].mean().item(),
                "l2_per_token": (out["l2"].sum() / out["n_tokens"].sum()).item(),
                "strategy_acc": float((pred == batch.strategy).float().mean()),
                "positive_feedback": int((batch.delta_s >= 0).sum()),
                "negative_feedback": int((batch.delta_s < 0).sum()),
            }
            records.append(rec)
            log_lines.append(json.dumps(rec))
            if cfg.max_steps is not None and step >= cfg.max_steps:
                done = True
                break
        if out_dir is not None:
            save_checkpoint(out_dir / f"epoch-{epoch:03d}.pt", model, {"epoch": epoch, "step": step})
        log.info("epoch %d done at step %d, loss %.4f", epoch, step, records[-1]["loss"])
        if done:
            break
    if out_dir is not None:
        from .io import atomic_write_text

        atomic_write_text(out_dir / "train_log.jsonl", "".join(l + "\n" for l in log_lines))
        save_checkpoint(out_dir / "last.pt", model, {"epoch": epoch, "step": step})
    model.eval()
    return records


@torch.no_grad()
def evaluate_features(model, feats, batch_size=32):
    """Predicted strategies and reference log-likelihoods.

    The generator is conditioned on the predicted strategy's description,
    as it is at inference time.

    Returns (predictions, summed NLL over tokens, token count).
    """
    model.eval()
    preds, total_nll, total_tok = [], 0.0, 0
    for i in range(0, len(feats), batch_size):
        batch = collate(feats[i:i + batch_size])
        out = model(batch, "predicted")
        preds.extend(torch.argmax(out["o_prime"], dim=-1).tolist())
        nll, n = token_nll(out["logits"], batch.decoder_out, batch.decoder_pad)
        total_nll += float(nll.sum())
        total_tok += int(n.sum())
    return preds, total_nll, total_tok


def config_dict(cfg):
    return asdict(cfg)
