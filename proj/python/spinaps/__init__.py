"""Python bindings for the spinaps core."""

from ._core import (
    RunConfig,
    clip_to_fixed,
    default_perf_config,
    lfsr_next,
    lfsr_seed_for,
    load_model,
    perf,
    pwl_sigmoid,
    quantize,
    quantize_values,
    simulate,
    train,
)

__all__ = [
    "RunConfig",
    "clip_to_fixed",
    "default_perf_config",
    "lfsr_next",
    "lfsr_seed_for",
    "load_model",
    "perf",
    "pwl_sigmoid",
    "quantize",
    "quantize_values",
    "simulate",
    "train",
]
