# Copyright 2026 The LIxP Lab Authors
# SPDX-License-Identifier: Apache-2.0
"""Contrastive training with in-batch contextualization and few-shot adapters."""

from ._core import (
    ConfigError,
    FormatError,
    TrainingError,
    accuracy,
    gradcheck_suite,
    nn_vote_logits,
    prototypical_logits,
    read_checkpoint,
    read_embeddings,
    relative_gain_fit,
    run_episodes,
    snn_plus_zeroshot_logits,
    tip_adapter_logits,
    train,
    write_checkpoint,
    write_embeddings,
    zero_shot_logits,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "TrainingError",
    "accuracy",
    "gradcheck_suite",
    "nn_vote_logits",
    "prototypical_logits",
    "read_checkpoint",
    "read_embeddings",
    "relative_gain_fit",
    "run_episodes",
    "snn_plus_zeroshot_logits",
    "tip_adapter_logits",
    "train",
    "write_checkpoint",
    "write_embeddings",
    "zero_shot_logits",
]
