"""Reward-guided sampling with classifier-free guidance."""

from reguide.sampling.sampler import (
    SampleTrace,
    StepRecord,
    batch_sample,
    guided_step,
    guided_update,
    sample,
)
from reguide.sampling.trace import samples_to_dataset, write_trace

__all__ = [
    "SampleTrace",
    "StepRecord",
    "batch_sample",
    "guided_step",
    "guided_update",
    "sample",
    "samples_to_dataset",
    "write_trace",
]
