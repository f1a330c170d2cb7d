from .config import ServiceConfig, load_service_config
from .engine import (
    AuthEngine,
    SessionState,
    WarningEvent,
    WarningPolicy,
    WindowScorer,
    fold_events,
)
from .app import build_app, create_app, load_scorers

__all__ = [
    "AuthEngine",
    "ServiceConfig",
    "SessionState",
    "WarningEvent",
    "WarningPolicy",
    "WindowScorer",
    "build_app",
    "create_app",
    "fold_events",
    "load_scorers",
    "load_service_config",
]
