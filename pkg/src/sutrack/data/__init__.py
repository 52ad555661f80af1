from .container import (
    ContainerError,
    list_sequences,
    read_dataset,
    read_image,
    read_sequence,
    write_dataset,
    write_image,
    write_sequence,
)
from .metrics import box_iou, metrics
from .sampler import SampleMix, TrainingPair, sample_batch
from .synthetic import Descriptor, SyntheticSequence, generate, generate_pool, random_descriptor

__all__ = [
    "ContainerError",
    "Descriptor",
    "SampleMix",
    "SyntheticSequence",
    "TrainingPair",
    "box_iou",
    "generate",
    "generate_pool",
    "list_sequences",
    "metrics",
    "random_descriptor",
    "read_dataset",
    "read_image",
    "read_sequence",
    "sample_batch",
    "write_dataset",
    "write_image",
    "write_sequence",
]
