"""Synthetic trajectory datasets standing in for text-motion corpora."""

from reguide.synthdata.generator import (
    CLASS_RANGES,
    PARAM_NAMES,
    VOCAB_SIZE,
    Condition,
    Dataset,
    MotionSequence,
    Pair,
    build_dataset,
    generate_motion,
    parse_condition,
    tokenize,
)
from reguide.synthdata.storage import load_dataset, save_dataset

__all__ = [
    "CLASS_RANGES",
    "PARAM_NAMES",
    "VOCAB_SIZE",
    "Condition",
    "Dataset",
    "MotionSequence",
    "Pair",
    "build_dataset",
    "generate_motion",
    "load_dataset",
    "parse_condition",
    "save_dataset",
    "tokenize",
]
