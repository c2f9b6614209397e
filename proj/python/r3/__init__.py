"""Replay, reflection and entropy-ranking policy optimization on a synthetic task suite."""

from ._r3 import (
    DegenerateGroupError,
    IoError,
    ValidationError,
    advantages,
    compare,
    dominance_scores,
    entropy_profile,
    entropy_rank_rewards,
    length_bonus,
    rank_rewards,
    token_entropy,
    train,
    validate_config,
    verify,
)

__all__ = [
    "DegenerateGroupError",
    "IoError",
    "ValidationError",
    "advantages",
    "compare",
    "dominance_scores",
    "entropy_profile",
    "entropy_rank_rewards",
    "length_bonus",
    "rank_rewards",
    "token_entropy",
    "train",
    "validate_config",
    "verify",
]
