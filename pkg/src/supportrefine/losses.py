"""Ranking and likelihood losses over token log-probabilities.

All functions accept tensors (and stay differentiable) or plain sequences
of floats (converted to float64 tensors).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence, Union

import torch

Array = Union[torch.Tensor, Sequence[float]]


@dataclass(frozen=True)
class Hyperparams:
    lambda_margin: float = 0.01
    alpha_length_penalty: float = 1.0
    beta_cl: float = 1.0
    beta_gen: float = 1.0
    K: int = 10
    learning_rate: float = 3e-5
    epochs: int = 1
    seed: int = 0
    pair_normalizer: str = "2K"  # "2K" | "pair_count"

    def __post_init__(self):
        if self.lambda_margin < 0 or self.beta_cl < 0 or self.beta_gen < 0:
            raise ValueError("lambda_margin, beta_cl and beta_gen must be non-negative")
        if self.K < 1 or self.epochs < 1:
            raise ValueError("K and epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.pair_normalizer not in ("2K", "pair_count"):
            raise ValueError(f"unknown pair_normalizer {self.pair_normalizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossBreakdown:
    l_cl: float
    l_gen: float
    total: float
    per_candidate_P: list[float] = field(default_factory=list)


def _t(values: Array) -> torch.Tensor:
    if isinstance(values, torch.Tensor):
        return values
    return torch.as_tensor(list(values), dtype=torch.float64)


def length_normalized_logprob(token_logprobs: Array, alpha: float = 1.0) -> torch.Tensor:
    """Sum of token log-probs divided by ``len ** alpha``."""
    lp = _t(token_logprobs)
    if lp.numel() == 0:
        raise ValueError("empty token log-prob sequence")
    return lp.sum() / (lp.numel() ** alpha)


def contrastive_loss(P: Array, labels: Sequence[int], lam: float = 0.01,
                     pair_normalizer: str = "2K") -> torch.Tensor:
    """Pairwise margin loss over one candidate set.

    ``sum_i sum_{j != i} max(0, -(l_i - l_j) * (P_i - P_j + lam))`` divided
    by ``2K`` (or by the ordered pair count ``K(K-1)``).  Note the margin
    sits inside the product, so a helpful/unhelpful pair costs nothing only
    once ``P_helpful >= P_unhelpful + lam``.
    """
    P = _t(P)
    K = P.numel()
    if K < 2:
        raise ValueError("contrastive loss needs at least two candidates")
    if len(labels) != K:
        raise ValueError(f"{len(labels)} labels for {K} candidates")
    lab = torch.as_tensor([int(l) for l in labels], dtype=P.dtype)
    dl = lab[:, None] - lab[None, :]
    dp = P[:, None] - P[None, :] + lam
    off_diag = ~torch.eye(K, dtype=torch.bool)
    terms = torch.relu(-(dl * dp)) * off_diag
    norm = 2 * K if pair_normalizer == "2K" else K * (K - 1)
    # summing in sorted order makes the result independent of candidate order
    return torch.sort(terms.flatten()).values.sum() / norm


def nll_loss(gold_token_logprobs: Array) -> torch.Tensor:
    lp = _t(gold_token_logprobs)
    if lp.numel() == 0:
        raise ValueError("empty gold response")
    return -lp.mean()


def total_loss(l_cl, l_gen, beta_cl: float = 1.0, beta_gen: float = 1.0):
    for v in (l_cl, l_gen):
        x = float(v.detach()) if isinstance(v, torch.Tensor) else float(v)
        if not math.isfinite(x):
            raise ValueError("loss components must be finite")
    return beta_cl * l_cl + beta_gen * l_gen
