"""Texture and shape descriptors for cell-image classification."""
from ._backend import backend_name

__version__ = "0.1.0"
__all__ = ["backend_name", "__version__"]
