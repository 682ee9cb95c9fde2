"""Full network: encoders -> strategy selector -> control reader -> generator."""
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import torch
from torch import nn

from .dcr import DoubleControlReader, FlowConfig, apply_flows
from .dfs import StrategySelector
from .emotion import LexiconEmotionScorer
from .encoders import ContextEncoder, EncoderConfig, StrategyHistoryEncoder, context_layout, pool_mean
from .generator import ResponseGenerator
from .strategies import NUM_STRATEGIES
from .stratdict import MODES, StrategyDictionary, description_ids
from .text import BOS_ID, EOS_ID, PAD_ID, Vocab

CHECKPOINT_FORMAT = "fado-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    mlp_layers: int = 1
    dictionary_mode: str = "description"
    use_strategy_history: bool = True
    use_emotion: bool = True

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = EncoderConfig(**self.encoder)
        if isinstance(self.flow, dict):
            self.flow = FlowConfig(**self.flow)
        if self.dictionary_mode not in MODES:
            raise ValueError(f"dictionary mode must be one of {MODES}")

    def to_dict(self):
        return asdict(self)


@dataclass
class Features:
    """One example turned into id lists and arrays."""
    context_ids: list
    emotion: np.ndarray  # T x d_e
    strategy_history: list
    strategy: int
    delta_s: float
    response_ids: list
    example_id: str = ""


@dataclass
class Batch:
    context_ids: torch.Tensor
    context_pad: torch.Tensor
    emotion: torch.Tensor
    strategy_ids: torch.Tensor
    strategy_pad: torch.Tensor
    strategy: torch.Tensor
    delta_s: torch.Tensor
    decoder_in: torch.Tensor
    decoder_out: torch.Tensor
    decoder_pad: torch.Tensor

    def __len__(self):
        return self.context_ids.shape[0]

    def to(self, dtype):
        """Cast the floating tensors (used for float64 checks)."""
        self.emotion = self.emotion.to(dtype)
        self.delta_s = self.delta_s.to(dtype)
        return self


def featurize(example, vocab, scorer, max_positions, max_response_tokens=None):
    """Turn a TrainingExample into id lists plus emotion features."""
    utts = [u.tokens for u in example.history]
    ids, _ = context_layout([vocab.encode(t) for t in utts])
    if len(ids) > max_positions:
        raise ValueError(f"context of {len(ids)} positions exceeds max_positions={max_positions}; "
                         "lower max_history_tokens")
    limit = max_positions - 1
    if max_response_tokens is not None:
        limit = min(limit, max_response_tokens)
    response = vocab.encode(example.target.tokens)[:limit]
    delta_s = example.feedback.delta_s if example.feedback is not None else 0.0
    return Features(
        context_ids=ids,
        emotion=scorer.features(utts),
        strategy_history=list(example.strategy_history),
        strategy=int(example.target.strategy),
        delta_s=float(delta_s),
        response_ids=response,
        example_id=example.id,
    )


def _pad(seqs, value):
    width = max((len(s) for s in seqs), default=0)
    out = torch.full((len(seqs), width), value, dtype=torch.long)
    mask = torch.ones((len(seqs), width), dtype=torch.bool)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.tensor(s, dtype=torch.long)
        mask[i, : len(s)] = False
    return out, mask


def collate(features):
    ctx, ctx_pad = _pad([f.context_ids for f in features], PAD_ID)
    d_e = features[0].emotion.shape[1]
    emo = torch.zeros(len(features), ctx.shape[1], d_e, dtype=torch.float32)
    for i, f in enumerate(features):
        emo[i, : len(f.context_ids)] = torch.from_numpy(np.asarray(f.emotion, dtype=np.float32))
    strat, strat_pad = _pad([f.strategy_history for f in features], 0)
    dec_in, dec_pad = _pad([[BOS_ID] + f.response_ids for f in features], PAD_ID)
    dec_out, _ = _pad([f.response_ids + [EOS_ID] for f in features], PAD_ID)
    return Batch(
        context_ids=ctx, context_pad=ctx_pad, emotion=emo,
        strategy_ids=strat, strategy_pad=strat_pad,
        strategy=torch.tensor([f.strategy for f in features], dtype=torch.long),
        delta_s=torch.tensor([f.delta_s for f in features], dtype=torch.float32),
        decoder_in=dec_in, decoder_out=dec_out, decoder_pad=dec_pad,
    )


class FADOModel(nn.Module):
    def __init__(self, config, vocab, dictionary=None, scorer=None):
        super().__init__()
        enc = config.encoder
        if enc.vocab_size != len(vocab):
            raise ValueError(f"encoder.vocab_size={enc.vocab_size} but vocabulary has {len(vocab)} entries")
        self.config = config
        self.vocab = vocab
        self.dictionary = dictionary or StrategyDictionary.default()
        self.scorer = scorer if scorer is not None else LexiconEmotionScorer(enc.emotion_dim, seed=enc.seed)
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(enc.seed)
            self.token_embedding = nn.Embedding(enc.vocab_size, enc.d)
            self.context_encoder = ContextEncoder(enc, self.token_embedding)
            self.strategy_encoder = StrategyHistoryEncoder(enc)
            self.emotion_proj = nn.Linear(enc.emotion_dim, enc.d, bias=False)
            self.dfs = StrategySelector(enc.d, config.mlp_layers)
            self.dcr = DoubleControlReader(enc.d)
            self.generator = ResponseGenerator(enc, self.token_embedding)
        desc = [description_ids(k, self.dictionary, vocab, config.dictionary_mode) for k in range(NUM_STRATEGIES)]
        ids, mask = _pad(desc, PAD_ID)
        self.register_buffer("description_ids", ids, persistent=False)
        self.register_buffer("description_pad", mask, persistent=False)

    # -- pieces -------------------------------------------------------------

    def descriptions(self):
        """Encoded descriptions V for all strategies: (l, L_v, d) and pad mask."""
        return self.context_encoder(self.description_ids, self.description_pad), self.description_pad

    def encode(self, batch):
        H = self.context_encoder(batch.context_ids, batch.context_pad)
        c = pool_mean(H, batch.context_pad)
        if self.config.use_strategy_history:
            s = self.strategy_encoder(batch.strategy_ids, batch.strategy_pad)
        else:
            s = torch.zeros_like(c)
        if self.config.use_emotion:
            r = self.emotion_proj(pool_mean(batch.emotion, batch.context_pad))
        else:
            r = torch.zeros_like(c)
        o = self.dfs(s, c, r)
        gates = self.dcr(c, o)
        o_prime, H_prime = apply_flows(o, H, gates, self.config.flow)
        return {"H": H, "c": c, "s": s, "r": r, "o": o, "gates": gates, "o_prime": o_prime, "H_prime": H_prime}

    def forward(self, batch, dictionary_strategy=None):
        """Run the whole network with teacher-forced decoding.

        `dictionary_strategy` picks the description fed to the generator:
        None for the gold strategy of each example, "predicted" for the
        argmax of o', or a tensor of strategy ids.
        """
        out = self.encode(batch)
        if dictionary_strategy is None:
            dictionary_strategy = batch.strategy
        elif isinstance(dictionary_strategy, str):
            if dictionary_strategy != "predicted":
                raise ValueError(f"unknown dictionary_strategy {dictionary_strategy!r}")
            dictionary_strategy = torch.argmax(out["o_prime"].detach(), dim=-1)
        V_all, V_pad = self.descriptions()
        V, V_mask = V_all[dictionary_strategy], V_pad[dictionary_strategy]
        memory = torch.cat([out["H_prime"], V], dim=1)
        memory_pad = torch.cat([batch.context_pad, V_mask], dim=1)
        out["logits"] = self.generator(batch.decoder_in, memory, memory_pad, batch.decoder_pad)
        return out

    # -- inference ----------------------------------------------------------

    @torch.no_grad()
    def respond(self, history, strategy_history, decoding, trace=None):
        """Predict a strategy and sample a response for one dialog history.

        `history` is a list of tokenized utterances (strings). Returns
        (strategy id, response token ids).
        """
        from .generator import generate

        ids, _ = context_layout([self.vocab.encode(t) for t in history])
        feats = Features(ids, self.scorer.features(history), list(strategy_history), 0, 0.0, [])
        batch = collate([feats])
        out = self.encode(batch)
        strategy = int(torch.argmax(out["o_prime"][0]))
        V_all, V_pad = self.descriptions()
        V = V_all[strategy][~V_pad[strategy]]
        tokens = generate(out["H_prime"][0], V, decoding, self, trace=trace)
        return strategy, tokens


def build_model(config, vocab, dictionary=None, scorer=None):
    return FADOModel(config, vocab, dictionary, scorer)


def save_checkpoint(path, model, extra=None):
    import io

    from .io import atomic_write_bytes

    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "vocab": model.vocab.to_list(),
        "dictionary": model.dictionary.to_json(),
        "scorer": model.scorer.to_dict(),
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a checkpoint of this package")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    config = ModelConfig(**payload["config"])
    model = FADOModel(
        config,
        Vocab(payload["vocab"]),
        StrategyDictionary.from_json(payload["dictionary"]),
        LexiconEmotionScorer.from_dict(payload["scorer"]),
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("extra", {})
