"""HTTP shim exposing next-token and mask-fill log scores of model pairs."""

from .app import create_app
from .providers import ContextTooLong, HFProvider, InvalidIds, Provider, ToyProvider

__version__ = "0.1.0"
