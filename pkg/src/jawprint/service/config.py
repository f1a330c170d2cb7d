"""Service configuration: JSON file with environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .engine import WarningPolicy

ENV_PREFIX = "JAWPRINT_"


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8011
    model_dir: str = "models"
    classifier: str = "svm"  # which enrolled model kind sessions score with
    policy: WarningPolicy = field(default_factory=WarningPolicy)


def load_service_config(path=None) -> ServiceConfig:
    """Defaults <- optional JSON file <- JAWPRINT_* environment variables."""
    blob = {}
    if path is not None:
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
    policy_blob = blob.get("policy", {})

    def env(name, cast, default):
        raw = os.environ.get(ENV_PREFIX + name)
        return cast(raw) if raw is not None else default

    policy = WarningPolicy(
        consecutive_failures=env("WARN_CONSECUTIVE", int, policy_blob.get("consecutive_failures", 3)),
        rolling_window=env("WARN_ROLLING_WINDOW", int, policy_blob.get("rolling_window", 20)),
        rolling_rate=env("WARN_ROLLING_RATE", float, policy_blob.get("rolling_rate", 0.30)),
    )
    return ServiceConfig(
        host=env("SERVICE_HOST", str, blob.get("host", "127.0.0.1")),
        port=env("SERVICE_PORT", int, blob.get("port", 8011)),
        model_dir=env("MODEL_DIR", str, blob.get("model_dir", "models")),
        classifier=env("SERVICE_CLASSIFIER", str, blob.get("classifier", "svm")),
        policy=policy,
    )
