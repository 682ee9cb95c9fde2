"""Feedback-aware double-controlling network for emotional support dialog."""

__version__ = "0.1.0"

from .strategies import NUM_STRATEGIES, STRATEGY_NAMES, strategy_id, strategy_name
from .corpus import (
    Conversation,
    SurveyScores,
    TrainingExample,
    Utterance,
    corpus_stats,
    extract_examples,
    load_corpus,
    split_corpus,
)
from .feedback import FeedbackSignals, compute_feedback, feedback_score
