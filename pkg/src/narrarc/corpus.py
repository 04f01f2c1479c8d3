"""Corpus ingestion: one plot text file per episode plus series metadata.

Layout: a directory holding ``series.toml`` (keys ``name`` and ``genre``)
and files named ``S{season:02}E{episode:02}.txt``. Re-ingesting is
idempotent; an episode's raw text is only updated when the file changed,
and a raw-text change resets the derived preprocessing stages.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any

try:
    import tomllib  # type: ignore[import-not-found]
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]

from .errors import MalformedCorpus, NotFound
from .model import EpisodeDoc, EpisodeKey
from .store import Store

_STRICT_NAME = re.compile(r"^S(\d{2})E(\d{2})\.txt$")


def read_series_meta(series_dir: Path) -> tuple[str, str]:
    meta_path = series_dir / "series.toml"
    if not meta_path.is_file():
        raise MalformedCorpus(f"missing series.toml in {series_dir}")
    try:
        meta = tomllib.loads(meta_path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise MalformedCorpus(f"invalid series.toml: {exc}") from exc
    name = meta.get("name", "")
    if not isinstance(name, str) or not name.strip():
        raise MalformedCorpus("series.toml must define a non-empty 'name'")
    genre = meta.get("genre", "")
    if not isinstance(genre, str):
        raise MalformedCorpus("series.toml 'genre' must be a string")
    return name, genre


def ingest_series(store: Store, series_dir: str | Path) -> dict[str, Any]:
    """Register the series and create or refresh its episode docs."""
    directory = Path(series_dir)
    if not directory.is_dir():
        raise MalformedCorpus(f"{directory} is not a directory")
    series, genre = read_series_meta(directory)

    created = updated = unchanged = 0
    with store.transaction():
        store.upsert_series(series, genre)
        for path in sorted(directory.glob("*.txt")):
            match = _STRICT_NAME.match(path.name)
            if match is None:
                raise MalformedCorpus(
                    f"bad episode filename {path.name!r}; expected S##E##.txt "
                    "with two-digit zero-padded numbers"
                )
            raw = path.read_text(encoding="utf-8")
            if not raw.strip():
                raise MalformedCorpus(f"episode file {path.name} is empty")
            key = EpisodeKey(series, int(match.group(1)), int(match.group(2)))
            try:
                existing = store.get_episode_doc(key)
            except NotFound:
                store.upsert_episode_doc(EpisodeDoc(key=key, raw_plot=raw))
                created += 1
                continue
            if existing.raw_plot == raw:
                unchanged += 1
                continue
            # Raw text changed: derived stages are stale, start the episode over.
            store.upsert_episode_doc(EpisodeDoc(key=key, raw_plot=raw))
            updated += 1
    return {
        "series": series,
        "genre": genre,
        "created": created,
        "updated": updated,
        "unchanged": unchanged,
    }
