"""Word-level tokenizer and vocabulary."""
import re
from collections import Counter

from .strategies import NUM_STRATEGIES

_TOKEN_RE = re.compile(r"\w+(?:'\w+)?|[^\w\s]")

PAD, UNK, CLS, SEP, BOS, EOS = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[BOS]", "[EOS]"
STRATEGY_TOKENS = tuple(f"[STRATEGY_{k}]" for k in range(NUM_STRATEGIES))
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, BOS, EOS) + STRATEGY_TOKENS
PAD_ID, UNK_ID, CLS_ID, SEP_ID, BOS_ID, EOS_ID = range(6)


def tokenize(text):
    """Lowercase and split into words and single punctuation marks."""
    return _TOKEN_RE.findall(text.lower().replace("\u2019", "'"))


class Vocab:
    """Token <-> id mapping. Ids 0..len(SPECIAL_TOKENS)-1 are reserved."""

    def __init__(self, tokens):
        self.itos = list(tokens)
        if tuple(self.itos[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the reserved special tokens")
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate vocabulary entries")

    @classmethod
    def build(cls, token_lists, max_size=8000, extra=()):
        """Most frequent types first (ties alphabetical), capped at max_size
        total entries including the reserved ones. `extra` token lists are
        counted as well (e.g. strategy descriptions)."""
        counts = Counter()
        for toks in token_lists:
            counts.update(toks)
        for toks in extra:
            counts.update(toks)
        for t in SPECIAL_TOKENS:
            counts.pop(t, None)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        room = max(0, max_size - len(SPECIAL_TOKENS))
        return cls(list(SPECIAL_TOKENS) + [t for t, _ in ranked[:room]])

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    @property
    def pad_id(self):
        return PAD_ID

    @property
    def unk_id(self):
        return UNK_ID

    @property
    def cls_id(self):
        return CLS_ID

    @property
    def sep_id(self):
        return SEP_ID

    @property
    def bos_id(self):
        return BOS_ID

    @property
    def eos_id(self):
        return EOS_ID

    def strategy_token_id(self, sid):
        return len(SPECIAL_TOKENS) - NUM_STRATEGIES + int(sid)

    def encode(self, tokens):
        unk = self.unk_id
        return [self.stoi.get(t, unk) for t in tokens]

    def decode(self, ids, skip_special=True):
        out = []
        for i in ids:
            tok = self.itos[i]
            if skip_special and tok in SPECIAL_TOKENS:
                continue
            out.append(tok)
        return out

    def to_list(self):
        return list(self.itos)
