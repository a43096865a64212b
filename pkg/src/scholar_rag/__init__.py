"""Local retrieval-augmented collaborator recommendation over publication corpora."""

__version__ = "0.1.0"

from .config import AppConfig, load_config
from .engine import RagEngine

__all__ = ["AppConfig", "RagEngine", "__version__", "load_config"]
