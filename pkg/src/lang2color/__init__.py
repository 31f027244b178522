"""lang2color: caption-conditioned colorization over quantized ab classes."""

__version__ = "0.1.0"

from .kernels import active_backend

__all__ = ["active_backend", "__version__"]
