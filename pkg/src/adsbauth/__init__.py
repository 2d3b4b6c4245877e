"""Fountain-coded ADS-B broadcast authentication for unmanned aircraft."""

from .bits import Bits
from .errors import AdsbAuthError

__version__ = "0.1.0"

__all__ = ["AdsbAuthError", "Bits", "__version__"]
