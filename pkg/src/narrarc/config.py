"""Configuration loading: defaults < TOML file < environment variables."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

try:
    import tomllib  # type: ignore[import-not-found]
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]

from .errors import ConfigError

PROVIDER_KINDS = ("mock", "live")


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "mock"
    fixture_path: str = ""
    api_key_env: str = "PROVIDER_API_KEY"
    base_url: str = ""
    model: str = "default-model"
    task_models: dict[str, str] = field(default_factory=dict)
    embed_dimension: int = 32
    temperature: float = 0.0
    max_repair_attempts: int = 2


@dataclass(frozen=True)
class SemanticConfig:
    link_threshold: float = 0.80
    link_k: int = 5
    cluster_threshold: float = 0.85


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8764
    cors_origin: str = "http://localhost:5173"


@dataclass(frozen=True)
class AppConfig:
    store_path: str = "narrarc.db"
    runs_dir: str = "runs"
    id_seed: int = 0
    eval_match_threshold: float = 0.80
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    semantic: SemanticConfig = field(default_factory=SemanticConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)


def _section(doc: dict[str, Any], name: str) -> dict[str, Any]:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section [{name}] must be a table")
    return value


def load_config(path: str | os.PathLike[str] | None = None) -> AppConfig:
    """Build the app configuration.

    Starts from defaults, applies the TOML file if given, then applies
    environment overrides (``PROVIDER_KIND``, ``PROVIDER_FIXTURE``,
    ``PROVIDER_MODEL``, ``PROVIDER_BASE_URL``); the environment always wins.
    """
    cfg = AppConfig()

    if path is not None:
        file_path = Path(path)
        if not file_path.is_file():
            raise ConfigError(f"config file not found: {file_path}")
        try:
            doc = tomllib.loads(file_path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid config file {file_path}: {exc}") from exc
        cfg = _apply_file(cfg, doc)

    cfg = _apply_env(cfg)

    if cfg.provider.kind not in PROVIDER_KINDS:
        raise ConfigError(
            f"provider kind must be one of {PROVIDER_KINDS}, got {cfg.provider.kind!r}"
        )
    return cfg


def _apply_file(cfg: AppConfig, doc: dict[str, Any]) -> AppConfig:
    store = _section(doc, "store")
    provider = _section(doc, "provider")
    semantic = _section(doc, "semantic")
    service = _section(doc, "service")
    evaluate = _section(doc, "evaluate")
    ids = _section(doc, "ids")

    task_models = provider.get("task_models", {})
    if not isinstance(task_models, dict):
        raise ConfigError("provider.task_models must be a table of task -> model")

    return AppConfig(
        store_path=str(store.get("path", cfg.store_path)),
        runs_dir=str(store.get("runs_dir", cfg.runs_dir)),
        id_seed=int(ids.get("seed", cfg.id_seed)),
        eval_match_threshold=float(
            evaluate.get("match_threshold", cfg.eval_match_threshold)
        ),
        provider=ProviderConfig(
            kind=str(provider.get("kind", cfg.provider.kind)),
            fixture_path=str(provider.get("fixture", cfg.provider.fixture_path)),
            api_key_env=str(provider.get("api_key_env", cfg.provider.api_key_env)),
            base_url=str(provider.get("base_url", cfg.provider.base_url)),
            model=str(provider.get("model", cfg.provider.model)),
            task_models={str(k): str(v) for k, v in task_models.items()},
            embed_dimension=int(
                provider.get("embed_dimension", cfg.provider.embed_dimension)
            ),
            temperature=float(provider.get("temperature", cfg.provider.temperature)),
            max_repair_attempts=int(
                provider.get("max_repair_attempts", cfg.provider.max_repair_attempts)
            ),
        ),
        semantic=SemanticConfig(
            link_threshold=float(
                semantic.get("link_threshold", cfg.semantic.link_threshold)
            ),
            link_k=int(semantic.get("link_k", cfg.semantic.link_k)),
            cluster_threshold=float(
                semantic.get("cluster_threshold", cfg.semantic.cluster_threshold)
            ),
        ),
        service=ServiceConfig(
            host=str(service.get("host", cfg.service.host)),
            port=int(service.get("port", cfg.service.port)),
            cors_origin=str(service.get("cors_origin", cfg.service.cors_origin)),
        ),
    )


def _apply_env(cfg: AppConfig) -> AppConfig:
    provider = cfg.provider
    kind = os.environ.get("PROVIDER_KIND")
    fixture = os.environ.get("PROVIDER_FIXTURE")
    model = os.environ.get("PROVIDER_MODEL")
    base_url = os.environ.get("PROVIDER_BASE_URL")
    if kind is not None:
        provider = replace(provider, kind=kind)
    if fixture is not None:
        provider = replace(provider, fixture_path=fixture)
    if model is not None:
        provider = replace(provider, model=model)
    if base_url is not None:
        provider = replace(provider, base_url=base_url)
    return replace(cfg, provider=provider)
