"""Shared fixtures: in-memory stores (integrity-swept on teardown) and
scripted mock gateways."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest

from narrarc.config import ProviderConfig, SemanticConfig
from narrarc.gateway import LLMGateway, MockProvider
from narrarc.model import Character, EpisodeDoc, EpisodeKey
from narrarc.store import Store

DATA_DIR = Path(__file__).parent / "data"
SERIES = "Mercy Point"


def fixture_script() -> list[dict[str, Any]]:
    return json.loads((DATA_DIR / "mock_script.json").read_text(encoding="utf-8"))


def run_fixture_season(store: Store, runs_dir: Path,
                       script: list[dict[str, Any]] | None = None):
    """Drive the bundled season end to end: ingest, preprocess, run."""
    from narrarc.corpus import ingest_series
    from narrarc.pipeline import run_season
    from narrarc.preprocess import preprocess_season

    gateway = LLMGateway(
        MockProvider(script if script is not None else fixture_script()),
        ProviderConfig(kind="mock", fixture_path="<inline>"),
    )
    ingest_series(store, DATA_DIR / "corpus" / "mercy_point")
    preprocess_season(gateway, store, SERIES, 1)
    reports = run_season(gateway, store, SERIES, 1, runs_dir=runs_dir,
                         semantic=SemanticConfig())
    return gateway, reports


@pytest.fixture
def store():
    s = Store(":memory:")
    yield s
    problems = s.integrity_sweep()
    assert problems == [], f"integrity sweep failed after test: {problems}"
    s.close()


@pytest.fixture
def make_gateway():
    """Factory for gateways backed by an in-test script."""

    def _make(script: list[dict[str, Any]], **config_kwargs: Any) -> LLMGateway:
        config = ProviderConfig(kind="mock", fixture_path="<inline>", **config_kwargs)
        provider = MockProvider(script, embed_dimension=config.embed_dimension)
        return LLMGateway(provider, config)

    return _make


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


def seed_episode(
    store: Store,
    series: str = SERIES,
    season: int = 1,
    episode: int = 1,
    plot: str = "Something happens at the hospital. Someone reacts to it.",
    summary: str = "A short episode summary.",
    genre: str = "medical drama",
) -> EpisodeKey:
    """Register a series and a fully preprocessed episode doc."""
    key = EpisodeKey(series, season, episode)
    store.upsert_series(series, genre)
    store.upsert_episode_doc(
        EpisodeDoc(
            key=key,
            raw_plot=plot,
            simplified_plot=plot,
            normalized_plot=plot,
            episode_summary=summary,
        )
    )
    return key


def seed_character(store: Store, name: str, series: str = SERIES,
                   aliases: tuple[str, ...] = ()) -> Character:
    return store.save_character(
        Character(
            character_id=store.new_id(),
            preferred_name=name,
            series=series,
            alternative_names=frozenset(aliases),
        )
    )
