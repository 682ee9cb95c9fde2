"""The eight support strategies annotated on supporter utterances."""

STRATEGY_NAMES = (
    "Question",
    "Restatement or Paraphrasing",
    "Reflection of Feelings",
    "Self-disclosure",
    "Affirmation and Reassurance",
    "Providing Suggestions",
    "Information",
    "Others",
)
NUM_STRATEGIES = len(STRATEGY_NAMES)

_BY_NAME = {name.lower(): i for i, name in enumerate(STRATEGY_NAMES)}


def strategy_id(name):
    """Map a strategy name to its id. Matching is case-insensitive because
    public exports spell e.g. "Reflection of feelings" in lower case."""
    try:
        return _BY_NAME[name.strip().lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown strategy {name!r}") from None


def strategy_name(sid):
    if not 0 <= int(sid) < NUM_STRATEGIES:
        raise ValueError(f"strategy id out of range: {sid}")
    return STRATEGY_NAMES[int(sid)]
