from .app import create_app
from .state import Registry, ServiceConfig, ServiceSession, SessionWorker

__all__ = ["Registry", "ServiceConfig", "ServiceSession", "SessionWorker", "create_app"]
