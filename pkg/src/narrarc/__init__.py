"""Narrative arc extraction, storage, and refinement for serialized TV seasons."""

from .model import (
    ArcType,
    Character,
    EpisodeDoc,
    EpisodeKey,
    NarrativeArc,
    Progression,
)

__version__ = "0.1.0"

__all__ = [
    "ArcType",
    "Character",
    "EpisodeDoc",
    "EpisodeKey",
    "NarrativeArc",
    "Progression",
    "__version__",
]
