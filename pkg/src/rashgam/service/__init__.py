from .app import SessionState, create_app, load_session

__all__ = ["SessionState", "create_app", "load_session"]
