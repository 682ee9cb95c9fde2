"""Loading, validating and slicing ESConv-style conversations."""
import json
import math
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .strategies import STRATEGY_NAMES, strategy_id
from .text import tokenize

SEEKER = "seeker"
SUPPORTER = "supporter"
MISSING = -1

# Field names of the public ESConv JSON release.
DEFAULT_SCHEMA = {
    "id": "id",
    "dialog": "dialog",
    "speaker": "speaker",
    "content": "content",
    "annotation": "annotation",
    "strategy": "strategy",
    "rating": "feedback",
    "survey": "survey_score",
    "survey_role": "seeker",
    "stress_pre": "initial_emotion_intensity",
    "stress_post": "final_emotion_intensity",
    "relevance": "relevance",
    "empathy": "empathy",
    "seeker_labels": ["seeker", "usr", "user"],
    "supporter_labels": ["supporter", "sys", "system"],
    # "reject" drops a conversation with an unannotated supporter turn,
    # "others" labels the turn as Others and flags it in the report.
    "missing_strategy": "reject",
}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Utterance:
    speaker: str
    text: str
    index: int
    strategy: Optional[int] = None
    rating: Optional[int] = None

    def __post_init__(self):
        if self.speaker not in (SEEKER, SUPPORTER):
            raise CorpusError(f"bad speaker {self.speaker!r}")
        if (self.strategy is not None) != (self.speaker == SUPPORTER):
            raise CorpusError(f"utterance {self.index}: strategy must be set iff speaker is supporter")
        if self.rating is not None and self.rating not in (1, 2, 3, 4, 5):
            raise CorpusError(f"utterance {self.index}: rating {self.rating} outside 1..5")

    @property
    def tokens(self):
        return tokenize(self.text)


@dataclass(frozen=True)
class SurveyScores:
    stress_pre: int = MISSING
    stress_post: int = MISSING
    relevance: int = MISSING
    empathy: int = MISSING


@dataclass(frozen=True)
class Conversation:
    id: str
    utterances: tuple
    survey: SurveyScores = field(default_factory=SurveyScores)

    def __post_init__(self):
        if not self.utterances:
            raise CorpusError(f"conversation {self.id}: no utterances")
        for i, u in enumerate(self.utterances):
            if u.index != i:
                raise CorpusError(f"conversation {self.id}: utterance indices not contiguous")

    def __len__(self):
        return len(self.utterances)


@dataclass
class TrainingExample:
    conv_id: str
    history: list
    target: Utterance
    strategy_history: list
    feedback: object = None  # FeedbackSignals
    conv_length: int = 0

    @property
    def id(self):
        return f"{self.conv_id}:{self.target.index}"

    @property
    def strategy(self):
        return self.target.strategy

    @property
    def progress(self):
        """Position of the target within its conversation, in [0, 1]."""
        if self.conv_length <= 1:
            return 0.0
        return self.target.index / (self.conv_length - 1)


def load_schema(path):
    with open(path) as f:
        overrides = json.load(f)
    return {**DEFAULT_SCHEMA, **overrides}


def _survey_int(raw):
    if raw is None or raw == "":
        return MISSING
    val = int(float(raw))
    if val == MISSING:
        return MISSING
    if not 1 <= val <= 5:
        raise CorpusError(f"survey score {raw!r} outside 1..5")
    return val


def _parse_esconv_record(rec, idx, schema, flags):
    seeker_labels = {s.lower() for s in schema["seeker_labels"]}
    supporter_labels = {s.lower() for s in schema["supporter_labels"]}
    conv_id = str(rec.get(schema["id"], idx))
    dialog = rec.get(schema["dialog"])
    if not isinstance(dialog, list) or not dialog:
        raise CorpusError("missing or empty dialog")
    utterances = []
    for i, turn in enumerate(dialog):
        raw_speaker = turn.get(schema["speaker"])
        text = turn.get(schema["content"])
        if raw_speaker is None or text is None:
            raise CorpusError(f"turn {i}: missing speaker/text")
        spk = str(raw_speaker).lower()
        if spk in seeker_labels:
            speaker = SEEKER
        elif spk in supporter_labels:
            speaker = SUPPORTER
        else:
            raise CorpusError(f"turn {i}: unknown speaker {raw_speaker!r}")
        ann = turn.get(schema["annotation"]) or {}
        strategy = rating = None
        if speaker == SUPPORTER:
            name = ann.get(schema["strategy"])
            if name is None:
                if schema["missing_strategy"] != "others":
                    raise CorpusError(f"turn {i}: supporter utterance without strategy")
                flags.append(f"turn {i}: missing strategy mapped to Others")
                strategy = STRATEGY_NAMES.index("Others")
            else:
                strategy = strategy_id(name)
        else:
            raw_rating = ann.get(schema["rating"])
            if raw_rating not in (None, ""):
                rating = int(raw_rating)
                if not 1 <= rating <= 5:
                    raise CorpusError(f"turn {i}: rating {raw_rating!r} outside 1..5")
        utterances.append(Utterance(speaker, str(text), i, strategy, rating))
    survey_rec = rec.get(schema["survey"]) or {}
    if schema.get("survey_role"):
        survey_rec = survey_rec.get(schema["survey_role"]) or {}
    survey = SurveyScores(
        stress_pre=_survey_int(survey_rec.get(schema["stress_pre"])),
        stress_post=_survey_int(survey_rec.get(schema["stress_post"])),
        relevance=_survey_int(survey_rec.get(schema["relevance"])),
        empathy=_survey_int(survey_rec.get(schema["empathy"])),
    )
    return Conversation(conv_id, tuple(utterances), survey)


def _parse_canonical_record(rec):
    utterances = tuple(
        Utterance(
            speaker=u["speaker"],
            text=u["text"],
            index=u["index"],
            strategy=None if u.get("strategy") is None else strategy_id(u["strategy"]),
            rating=u.get("rating"),
        )
        for u in rec["utterances"]
    )
    return Conversation(str(rec["id"]), utterances, SurveyScores(**rec.get("survey", {})))


def load_corpus(path, schema_cfg=None, *, fail_fast=False, report=None):
    """Read a JSON array of conversations.

    Accepts either the ESConv release layout (field names from `schema_cfg`,
    defaulting to DEFAULT_SCHEMA) or the canonical layout written by
    `dump_corpus`. Records that fail validation are skipped and described in
    `report` (a list, appended to) unless `fail_fast` is set.
    """
    schema = {**DEFAULT_SCHEMA, **(schema_cfg or {})}
    try:
        with open(path, encoding="utf-8") as f:
            records = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CorpusError(f"cannot read corpus {path}: {e}") from e
    if not isinstance(records, list):
        raise CorpusError("corpus file must hold a JSON array")
    if not records:
        raise CorpusError("empty corpus")

    convs = []
    for idx, rec in enumerate(records):
        flags = []
        try:
            if not isinstance(rec, dict):
                raise CorpusError("record is not an object")
            if "utterances" in rec:
                conv = _parse_canonical_record(rec)
            else:
                conv = _parse_esconv_record(rec, idx, schema, flags)
        except (CorpusError, ValueError, TypeError, KeyError, AttributeError) as e:
            if fail_fast:
                raise CorpusError(f"record {idx}: {e}") from e
            if report is not None:
                rid = rec.get(schema["id"], idx) if isinstance(rec, dict) else idx
                report.append({"record": idx, "id": str(rid), "status": "rejected", "reason": str(e)})
            continue
        if flags and report is not None:
            for msg in flags:
                report.append({"record": idx, "id": conv.id, "status": "flagged", "reason": msg})
        convs.append(conv)
    if not convs:
        raise CorpusError("empty corpus (every record was rejected)")
    return convs


def conversation_to_dict(conv):
    return {
        "id": conv.id,
        "utterances": [
            {
                "speaker": u.speaker,
                "text": u.text,
                "index": u.index,
                "strategy": None if u.strategy is None else STRATEGY_NAMES[u.strategy],
                "rating": u.rating,
            }
            for u in conv.utterances
        ],
        "survey": asdict(conv.survey),
    }


def dump_corpus(convs, path):
    """Write conversations in the canonical layout (reloadable by load_corpus)."""
    from .io import atomic_write_text

    atomic_write_text(path, json.dumps([conversation_to_dict(c) for c in convs], indent=1, ensure_ascii=False))


def write_rejection_report(report, path):
    from .io import atomic_write_text

    atomic_write_text(path, "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in report))


def truncate_history(utterances, max_tokens):
    """Keep the most recent whole utterances whose token total fits the budget.

    If even the latest utterance alone is over budget it is kept with its
    oldest tokens cut, so that the model always sees some context.
    """
    kept, total = [], 0
    for u in reversed(utterances):
        n = len(u.tokens)
        if total + n > max_tokens:
            break
        kept.append(u)
        total += n
    if not kept and utterances:
        last = utterances[-1]
        toks = last.tokens[-max_tokens:]
        kept.append(Utterance(last.speaker, " ".join(toks), last.index, last.strategy, last.rating))
    return kept[::-1]


def extract_examples(conv, max_history_tokens=256, emotion_scorer=None, *, corpus_means=None, mu=0.5,
                     conversation_mode="centered"):
    """One example per supporter utterance that has at least one predecessor."""
    from .feedback import compute_feedback

    if max_history_tokens < 1:
        raise ValueError("max_history_tokens must be >= 1")
    out = []
    for u in conv.utterances:
        if u.speaker != SUPPORTER or u.index == 0:
            continue
        history = truncate_history(conv.utterances[: u.index], max_history_tokens)
        fb = compute_feedback(conv, u.index, emotion_scorer, corpus_means=corpus_means, mu=mu,
                              conversation_mode=conversation_mode)
        out.append(TrainingExample(
            conv_id=conv.id,
            history=history,
            target=u,
            strategy_history=[h.strategy for h in history if h.speaker == SUPPORTER],
            feedback=fb,
            conv_length=len(conv),
        ))
    return out


def split_corpus(convs, ratios=(0.8, 0.1, 0.1), seed=0, official=None):
    """Partition whole conversations into (train, dev, test).

    `official` maps "train"/"dev"/"test" to lists of conversation ids and,
    when given, replaces the seeded shuffle.
    """
    if official is not None:
        by_id = {c.id: c for c in convs}
        parts = []
        seen = set()
        for name in ("train", "dev", "test"):
            ids = [str(i) for i in official.get(name, [])]
            missing = [i for i in ids if i not in by_id]
            if missing:
                raise CorpusError(f"split {name} lists unknown ids {missing[:5]}")
            dup = seen.intersection(ids)
            if dup:
                raise CorpusError(f"ids appear in several splits: {sorted(dup)[:5]}")
            seen.update(ids)
            parts.append([by_id[i] for i in ids])
        return tuple(parts)

    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"invalid split ratios {ratios}")
    order = list(range(len(convs)))
    random.Random(seed).shuffle(order)
    n = len(convs)
    n_dev = math.floor(n * ratios[1])
    n_test = math.floor(n * ratios[2])
    n_train = n - n_dev - n_test
    shuffled = [convs[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:n_train + n_dev], shuffled[n_train + n_dev:]


def split_ids(splits):
    return {name: [c.id for c in part] for name, part in zip(("train", "dev", "test"), splits)}


@dataclass
class CorpusStats:
    n_dialogues: int
    n_utterances: int
    n_supporter: int
    n_seeker: int
    avg_dialog_length: float
    avg_supporter_per_dialog: float
    avg_seeker_per_dialog: float
    avg_utterance_length: float
    avg_supporter_utterance_length: float
    avg_seeker_utterance_length: float
    negative_stress_fraction: float
    stress_change_histogram: dict

    def to_dict(self):
        return asdict(self)


def corpus_stats(convs):
    if not convs:
        raise CorpusError("corpus_stats needs at least one conversation")
    n_sup = n_seek = tok_sup = tok_seek = 0
    changes = Counter()
    for c in convs:
        for u in c.utterances:
            n = len(u.tokens)
            if u.speaker == SUPPORTER:
                n_sup += 1
                tok_sup += n
            else:
                n_seek += 1
                tok_seek += n
        s = c.survey
        if s.stress_pre != MISSING and s.stress_post != MISSING:
            changes[s.stress_post - s.stress_pre] += 1
    n_d = len(convs)
    n_u = n_sup + n_seek
    surveyed = sum(changes.values())
    return CorpusStats(
        n_dialogues=n_d,
        n_utterances=n_u,
        n_supporter=n_sup,
        n_seeker=n_seek,
        avg_dialog_length=n_u / n_d,
        avg_supporter_per_dialog=n_sup / n_d,
        avg_seeker_per_dialog=n_seek / n_d,
        avg_utterance_length=(tok_sup + tok_seek) / n_u,
        avg_supporter_utterance_length=tok_sup / n_sup if n_sup else 0.0,
        avg_seeker_utterance_length=tok_seek / n_seek if n_seek else 0.0,
        negative_stress_fraction=(sum(v for k, v in changes.items() if k < 0) / surveyed) if surveyed else math.nan,
        stress_change_histogram={int(k): changes[k] for k in sorted(changes)},
    )
