"""Strategy dictionary: a natural-language description for each strategy."""
import json
from importlib import resources

import torch

from .strategies import NUM_STRATEGIES, STRATEGY_NAMES, strategy_id
from .text import CLS_ID, tokenize

MODES = ("description", "token")


def default_dictionary_path():
    return resources.files("fado") / "data" / "strategy_dictionary.json"


class StrategyDictionary:
    def __init__(self, entries):
        entries = {int(k): str(v) for k, v in entries.items()}
        missing = [STRATEGY_NAMES[k] for k in range(NUM_STRATEGIES) if not entries.get(k, "").strip()]
        if missing or len(entries) != NUM_STRATEGIES:
            raise ValueError(f"strategy dictionary must describe all eight strategies; missing {missing}")
        self.entries = entries

    @classmethod
    def from_json(cls, text):
        raw = json.loads(text)
        return cls({strategy_id(name): desc for name, desc in raw.items()})

    @classmethod
    def load(cls, path=None):
        path = path or default_dictionary_path()
        with open(path, encoding="utf-8") as f:
            return cls.from_json(f.read())

    @classmethod
    def default(cls):
        return cls.load()

    def to_json(self):
        obj = {STRATEGY_NAMES[k]: self.entries[k] for k in range(NUM_STRATEGIES)}
        return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"

    def save(self, path):
        from .io import atomic_write_text

        atomic_write_text(path, self.to_json())

    def lookup(self, strategy):
        return self.entries[int(strategy)]

    def tokens(self, strategy):
        return tokenize(self.lookup(strategy))


def lookup(strategy, dictionary):
    return dictionary.lookup(strategy)


def description_ids(strategy, dictionary, vocab, mode="description"):
    """[CLS] followed by the description tokens, or by a single strategy
    token in "token" mode."""
    if mode == "description":
        return [CLS_ID] + vocab.encode(dictionary.tokens(strategy))
    if mode == "token":
        return [CLS_ID, vocab.strategy_token_id(strategy)]
    raise ValueError(f"unknown dictionary mode {mode!r}")


def encode_description(strategy, model):
    """V for one strategy: its description encoded by the shared context encoder."""
    ids = description_ids(strategy, model.dictionary, model.vocab, model.config.dictionary_mode)
    return model.context_encoder(torch.tensor([ids], dtype=torch.long))[0]
