"""Configuration: one JSON file, a few environment overrides, factories.

Schema (all keys optional; defaults shown):

    {
      "mode": "mock",                  # "mock" | "live"
      "seed": 0,
      "data_dir": "./s2p-data",
      "count_default": 4,
      "retry": {"max_attempts": 5, "base_delay_ms": 500, "multiplier": 2.0,
                "jitter_fraction": 0.1, "max_delay_ms": 10000},
      "rate_limits": {"describe": {"capacity": 4, "per_second": 2.0}, ...},
      "live": {
        "api_key": null,
        "describe":      {"base_url": "", "model": ""},
        "images":        {"base_url": "", "model": "", "resolution": "1024x1024"},
        "guided_images": {"base_url": "", "model": "", "resolution": "1024x1024"},
        "mesh":          {"base_url": "", "backends": ["one-2-3-45",
                          "dreamgaussian", "shap-e"]},
        "embed":         {"base_url": "", "model": ""}
      },
      "service": {"host": "127.0.0.1", "port": 8765, "workers": 4,
                  "cors_origins": ["http://localhost:5173"]}
    }

Environment overrides: S2P_PROVIDER_MODE, S2P_API_KEY, S2P_SEED,
S2P_DATA_DIR; S2P_CONFIG names the config file itself.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .gateway import Gateway, RetryPolicy, TokenBucket, mock_gateway
from .metrics import Embedder, HistogramEmbedder
from .store import DataStore

ENV_MODE = "S2P_PROVIDER_MODE"
ENV_API_KEY = "S2P_API_KEY"
ENV_SEED = "S2P_SEED"
ENV_DATA_DIR = "S2P_DATA_DIR"
ENV_CONFIG = "S2P_CONFIG"

DEFAULT_LIVE_MESH_BACKENDS = ("one-2-3-45", "dreamgaussian", "shap-e")


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    workers: int = 4
    cors_origins: list[str] = field(default_factory=lambda: ["http://localhost:5173"])


@dataclass
class AppConfig:
    mode: str = "mock"
    seed: int = 0
    data_dir: str = "./s2p-data"
    count_default: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    rate_limits: dict = field(default_factory=dict)
    live: dict = field(default_factory=dict)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def __post_init__(self):
        if self.mode not in ("mock", "live"):
            raise ValidationError(f"mode must be mock or live, got {self.mode!r}")
        if self.count_default < 1:
            raise ValidationError("count_default must be positive")


def load_config(
    path: str | Path | None = None, env: dict | None = None
) -> AppConfig:
    """Read the config file (if any), then apply environment overrides."""
    env = os.environ if env is None else env
    if path is None:
        path = env.get(ENV_CONFIG)
    raw: dict = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a JSON object")

    mode = env.get(ENV_MODE, raw.get("mode", "mock"))
    seed = raw.get("seed", 0)
    if ENV_SEED in env:
        try:
            seed = int(env[ENV_SEED])
        except ValueError:
            raise ValidationError(f"{ENV_SEED} must be an integer") from None
    data_dir = env.get(ENV_DATA_DIR, raw.get("data_dir", "./s2p-data"))

    live = dict(raw.get("live", {}))
    if env.get(ENV_API_KEY):
        live["api_key"] = env[ENV_API_KEY]

    retry_raw = raw.get("retry", {})
    service_raw = raw.get("service", {})
    try:
        retry = RetryPolicy(**retry_raw)
        service = ServiceConfig(**service_raw)
    except TypeError as exc:
        raise ValidationError(f"bad config key: {exc}") from None

    return AppConfig(
        mode=mode,
        seed=seed,
        data_dir=data_dir,
        count_default=raw.get("count_default", 4),
        retry=retry,
        rate_limits=dict(raw.get("rate_limits", {})),
        live=live,
        service=service,
    )


def build_store(config: AppConfig) -> DataStore:
    return DataStore(config.data_dir)


def build_embedder(config: AppConfig) -> Embedder:
    if config.mode == "live" and config.live.get("embed", {}).get("base_url"):
        from .metrics.embed import LiveEmbedder

        embed_cfg = config.live["embed"]
        return LiveEmbedder(
            base_url=embed_cfg["base_url"],
            api_key=config.live.get("api_key"),
            model=embed_cfg.get("model", ""),
        )
    return HistogramEmbedder()


def _rate_limiters(config: AppConfig) -> dict[str, TokenBucket]:
    limiters = {}
    for capability, spec in config.rate_limits.items():
        limiters[capability] = TokenBucket(
            capacity=spec.get("capacity", 4),
            rate_per_second=spec.get("per_second", 2.0),
        )
    return limiters


def build_gateway(config: AppConfig) -> Gateway:
    if config.mode == "mock":
        return mock_gateway(
            seed=config.seed,
            retry_policy=config.retry,
            rate_limiters=_rate_limiters(config),
        )

    from .gateway.live import (
        LiveDescriber,
        LiveImageToMesh,
        LiveSketchGuided,
        LiveTextToImage,
    )

    live = config.live
    api_key = live.get("api_key")

    def section(name: str) -> dict:
        sec = live.get(name)
        if not sec or not sec.get("base_url"):
            raise ValidationError(f"live mode requires live.{name}.base_url")
        return sec

    describe = section("describe")
    images = section("images")
    guided = section("guided_images")
    mesh = section("mesh")
    backends = {
        name: LiveImageToMesh(
            mesh["base_url"], api_key, backend=name, model=mesh.get("model", "")
        )
        for name in mesh.get("backends", DEFAULT_LIVE_MESH_BACKENDS)
    }
    return Gateway(
        LiveDescriber(
            describe["base_url"], api_key, model=describe.get("model", "")
        ),
        LiveTextToImage(
            images["base_url"],
            api_key,
            model=images.get("model", ""),
            resolution=images.get("resolution", "1024x1024"),
        ),
        LiveSketchGuided(
            guided["base_url"],
            api_key,
            model=guided.get("model", ""),
            resolution=guided.get("resolution", "1024x1024"),
        ),
        backends,
        retry_policy=config.retry,
        rate_limiters=_rate_limiters(config),
    )


def build_pipeline(config: AppConfig):
    from .pipeline import PipelineService

    return PipelineService(
        build_store(config), build_gateway(config), build_embedder(config)
    )
