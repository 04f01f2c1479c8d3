#!/usr/bin/env python3
"""Launch a throwaway narrarc API server for frontend tests.

Usage: python3 fixture_server.py CONFIG_JSON_PATH

The config file holds:
  port            -- listen port (required)
  golden          -- optional path to a canonical export to import
  script          -- optional mock gateway script entries
  seed_episode    -- optional {series, genre, season, episode, plot, summary}
                     to register a preprocessed episode for draft endpoints
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import uvicorn

from narrarc.api import create_app
from narrarc.config import AppConfig, ProviderConfig, ServiceConfig
from narrarc.gateway import LLMGateway, MockProvider
from narrarc.model import EpisodeDoc, EpisodeKey
from narrarc.store import Store


def main() -> None:
    options = json.loads(Path(sys.argv[1]).read_text(encoding="utf-8"))
    store = Store(":memory:")

    golden = options.get("golden")
    if golden:
        store.import_doc(json.loads(Path(golden).read_text(encoding="utf-8")))

    seed = options.get("seed_episode")
    if seed:
        store.upsert_series(seed["series"], seed.get("genre", ""))
        store.upsert_episode_doc(
            EpisodeDoc(
                key=EpisodeKey(seed["series"], seed["season"], seed["episode"]),
                raw_plot=seed["plot"],
                simplified_plot=seed["plot"],
                normalized_plot=seed["plot"],
                episode_summary=seed.get("summary", "Summary."),
            )
        )

    series = options.get("series")
    if series:
        store.upsert_series(series["name"], series.get("genre", ""))

    gateway = LLMGateway(
        MockProvider(options.get("script", [])),
        ProviderConfig(kind="mock", fixture_path="<inline>"),
    )
    config = AppConfig(
        runs_dir=options.get("runs_dir", "/tmp/narrarc-frontend-runs"),
        provider=ProviderConfig(kind="mock", fixture_path="<inline>"),
        service=ServiceConfig(cors_origin="*"),
    )
    app = create_app(store, gateway, config)
    uvicorn.run(app, host="127.0.0.1", port=int(options["port"]), log_level="warning")


if __name__ == "__main__":
    main()
