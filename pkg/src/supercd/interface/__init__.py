"""Configuration, CLI, session persistence, and the annotation service."""

from .config import DEFAULTS, load_config
from .service import create_app, run_service
from .sessions import SessionManager
from .store import SessionStore

__all__ = [
    "DEFAULTS",
    "load_config",
    "create_app",
    "run_service",
    "SessionManager",
    "SessionStore",
]
