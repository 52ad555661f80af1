from . import tensor as F
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import gradcheck, numerical_grad
from .module import MLP, LayerNorm, Linear, Module, Parameter
from .optim import AdamW, OptimState
from .tensor import ShapeError, Tensor, as_tensor, no_grad

__all__ = [
    "F",
    "AdamW",
    "CheckpointError",
    "LayerNorm",
    "Linear",
    "MLP",
    "Module",
    "OptimState",
    "Parameter",
    "ShapeError",
    "Tensor",
    "as_tensor",
    "gradcheck",
    "load_checkpoint",
    "no_grad",
    "numerical_grad",
    "save_checkpoint",
]
