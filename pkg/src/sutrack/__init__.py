"""Unified multi-modal single-object tracking at desk scale."""
from .embedding import ModalFrame, Task
from .model import ModelConfig, ModelInputs, TrackerModel

__version__ = "0.1.0"

__all__ = ["ModalFrame", "ModelConfig", "ModelInputs", "Task", "TrackerModel"]
