from .app import create_app
from .manager import RigManager

__all__ = ["create_app", "RigManager"]
