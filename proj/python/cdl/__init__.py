"""Python bindings for the curriculum dual learning library."""

from ._cdl import (
    Classifier,
    Dataset,
    Emotion,
    Error,
    IntegrityError,
    Model,
    ValidationError,
    bleu,
    competence,
    distinct,
    emotion_reward,
    emotion_word_rate,
    explicit_emotion_reward,
    total_reward,
)

EMOTIONS = [Emotion.Neutral, Emotion.Like, Emotion.Sad, Emotion.Disgust, Emotion.Angry, Emotion.Happy]

__all__ = [
    "Classifier",
    "Dataset",
    "EMOTIONS",
    "Emotion",
    "Error",
    "IntegrityError",
    "Model",
    "ValidationError",
    "bleu",
    "competence",
    "distinct",
    "emotion_reward",
    "emotion_word_rate",
    "explicit_emotion_reward",
    "total_reward",
]
