"""Prompt templates shipped as package data, one file per task.

Templates are plain text with ``str.format`` placeholders so they can be
reviewed and versioned like any other source file.
"""

from __future__ import annotations

from importlib import resources

_cache: dict[str, str] = {}

SYSTEM_PROMPT = (
    "You are a narrative analyst for serialized television. "
    "Always answer with a single JSON object that matches the requested schema, "
    "with no surrounding prose."
)


def render(name: str, **params: object) -> str:
    """Render the named template with the given placeholder values."""
    if name not in _cache:
        _cache[name] = (
            resources.files(__package__).joinpath(f"{name}.txt").read_text("utf-8")
        )
    try:
        return _cache[name].format(**params)
    except KeyError as exc:
        raise KeyError(f"template {name!r} is missing placeholder value {exc}") from exc
