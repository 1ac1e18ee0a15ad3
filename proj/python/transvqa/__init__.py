"""Transferable adversarial attacks on visual question answering models.

Images are float arrays of shape (H, W, C) with values in [0, 1].
Configuration overrides are plain dicts using the config-file keys.
"""

from ._transvqa import (
    TransvqaError,
    attack,
    attack_dataset,
    clip_to_budget,
    cli,
    config_hash,
    default_config,
    evaluate_run,
    is_correct,
    linf_distance,
    make_synthetic_dataset,
    models,
    normalize_answer,
    predict,
    random_image,
    resolve_config,
    tokenize,
    trigger_schedule,
)

__all__ = [
    "TransvqaError",
    "attack",
    "attack_dataset",
    "clip_to_budget",
    "cli",
    "config_hash",
    "default_config",
    "evaluate_run",
    "is_correct",
    "linf_distance",
    "make_synthetic_dataset",
    "models",
    "normalize_answer",
    "predict",
    "random_image",
    "resolve_config",
    "tokenize",
    "trigger_schedule",
]
