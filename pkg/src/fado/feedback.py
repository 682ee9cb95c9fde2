"""Turn-level and conversation-level feedback signals.

The combined score ds = de + dr + mu * dc decides whether the strategy loss
encourages (ds >= 0) or penalizes (ds < 0) the annotated strategy.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import MISSING, SEEKER, SUPPORTER

DEFAULT_MU = 0.5
NEUTRAL = {"stress_pre": 3.0, "stress_post": 3.0, "relevance": 3.0, "empathy": 3.0}


@dataclass(frozen=True)
class FeedbackSignals:
    delta_e: float
    delta_r: float
    delta_c: float
    delta_s: float
    mu: float

    @property
    def positive(self):
        return self.delta_s >= 0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CorpusMeans:
    stress_pre: float = 3.0
    stress_post: float = 3.0
    relevance: float = 3.0
    empathy: float = 3.0

    def to_dict(self):
        return asdict(self)


def compute_corpus_means(convs):
    """Per-field survey means over conversations where the field is present.

    Call this on the training split only.
    """
    fields = ("stress_pre", "stress_post", "relevance", "empathy")
    means = {}
    for name in fields:
        vals = [getattr(c.survey, name) for c in convs if getattr(c.survey, name) != MISSING]
        means[name] = float(np.mean(vals)) if vals else NEUTRAL[name]
    return CorpusMeans(**means)


def polarity_scores(scorer, utterances):
    if hasattr(scorer, "scores"):
        scores = np.asarray(scorer.scores(utterances), dtype=float)
    else:
        scores = np.asarray(scorer(utterances)[1], dtype=float)
    if np.any((scores < 0) | (scores > 1)) or not np.all(np.isfinite(scores)):
        raise ValueError("emotion scorer returned a score outside [0, 1]")
    return scores


def _check_target(conv, target_index):
    if not 0 <= target_index < len(conv) or conv.utterances[target_index].speaker != SUPPORTER:
        raise ValueError(f"utterance {target_index} of conversation {conv.id} is not a supporter utterance")


def turn_emotion_delta(conv, target_index, scorer):
    """Change in positive-polarity score between the last two seeker
    utterances preceding the target; 0 with fewer than two."""
    _check_target(conv, target_index)
    seeker = [u for u in conv.utterances[:target_index] if u.speaker == SEEKER]
    if len(seeker) < 2 or scorer is None:
        return 0.0
    prev, last = polarity_scores(scorer, [seeker[-2].tokens, seeker[-1].tokens])
    return float(last - prev)


def turn_rating_delta(conv, target_index):
    """Change between the last two star ratings before the target, each
    rescaled to [0, 1] by (r - 1) / 4."""
    _check_target(conv, target_index)
    ratings = [u.rating for u in conv.utterances[:target_index] if u.rating is not None]
    for r in ratings:
        if r not in (1, 2, 3, 4, 5):
            raise ValueError(f"rating {r} outside 1..5")
    if len(ratings) < 2:
        return 0.0
    return (ratings[-1] - 1) / 4 - (ratings[-2] - 1) / 4


def conversation_delta(survey, corpus_means=None, mode="centered"):
    """Post-conversation survey score.

    centered: -(stress_post - stress_pre)/4 + (relevance - 3)/2 + (empathy - 3)/2,
    so each term lies in [-1, 1] and a drop in stress counts as positive.
    sum: stress_post + relevance + empathy, the raw total.
    Missing (-1) fields take the training-split mean.
    """
    means = corpus_means or CorpusMeans()

    def get(name):
        v = getattr(survey, name)
        return float(getattr(means, name)) if v == MISSING else float(v)

    if mode == "centered":
        return (-(get("stress_post") - get("stress_pre")) / 4
                + (get("relevance") - 3) / 2
                + (get("empathy") - 3) / 2)
    if mode == "sum":
        return get("stress_post") + get("relevance") + get("empathy")
    raise ValueError(f"unknown conversation feedback mode {mode!r}")


def feedback_score(delta_e, delta_r, delta_c, mu=DEFAULT_MU):
    for v in (delta_e, delta_r, delta_c, mu):
        if not math.isfinite(v):
            raise ValueError("feedback components must be finite")
    return delta_e + delta_r + mu * delta_c


def compute_feedback(conv, target_index, scorer, *, corpus_means=None, mu=DEFAULT_MU,
                     conversation_mode="centered", use_turn=True, use_conversation=True):
    de = turn_emotion_delta(conv, target_index, scorer) if use_turn else 0.0
    dr = turn_rating_delta(conv, target_index) if use_turn else 0.0
    dc = conversation_delta(conv.survey, corpus_means, conversation_mode) if use_conversation else 0.0
    return FeedbackSignals(de, dr, dc, feedback_score(de, dr, dc, mu), mu)
