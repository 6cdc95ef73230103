"""RGB-thermal salient object detection with frequency-domain fusion,
written against numpy with its own FFT and reverse-mode autodiff."""

from .model import Model, ModelConfig
from .tensor import Tensor

__version__ = "0.1.0"
__all__ = ["Model", "ModelConfig", "Tensor", "__version__"]
