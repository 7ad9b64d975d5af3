"""A small decoder-only transformer used as the conditional response model.

The model reads ``context ids + [sep] + response prefix`` under a causal
mask and predicts the next response token.  All entry points that the
rest of the package relies on are plain functions over a
``TinyTransformer``:

* ``forward_logprobs`` / ``batch_logprobs`` give teacher-forced token
  log-probabilities (differentiable),
* ``next_token_logprobs`` gives full next-token distributions for decoding,
* ``backward`` turns a scalar loss into a flat gradient array.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .tokenizer import EOS, PAD, SEP

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embedding_dim: int = 64
    layer_count: int = 2
    head_count: int = 4
    max_sequence_len: int = 64
    feedforward_dim: int = 128
    seed: int = 0
    init: str = "normal"  # "normal" | "zeros" (zero output head -> uniform predictions)
    dtype: str = "float32"
    sep_id: int = SEP
    eos_id: int = EOS
    pad_id: int = PAD

    def __post_init__(self):
        for name in ("vocab_size", "embedding_dim", "layer_count", "head_count",
                     "max_sequence_len", "feedforward_dim"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.embedding_dim % self.head_count:
            raise ValueError("embedding_dim must be divisible by head_count")
        if self.max_sequence_len < 2:
            raise ValueError("max_sequence_len must be at least 2")
        if self.init not in ("normal", "zeros"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.dtype not in DTYPES:
            raise ValueError(f"unknown dtype {self.dtype!r}")
        for name in ("sep_id", "eos_id", "pad_id"):
            if not 0 <= getattr(self, name) < self.vocab_size:
                raise ValueError(f"{name} outside vocabulary")

    def to_dict(self) -> dict:
        return asdict(self)

    def parameter_count(self) -> int:
        d, f, v, L = self.embedding_dim, self.feedforward_dim, self.vocab_size, self.max_sequence_len
        per_layer = 2 * 2 * d + (3 * d * d + 3 * d) + (d * d + d) + (d * f + f) + (f * d + d)
        return v * d + L * d + self.layer_count * per_layer + 2 * d + (d * v + v)


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.embedding_dim
        self.heads = cfg.head_count
        self.ln1 = nn.LayerNorm(d)
        self.qkv = nn.Linear(d, 3 * d)
        self.proj = nn.Linear(d, d)
        self.ln2 = nn.LayerNorm(d)
        self.ff1 = nn.Linear(d, cfg.feedforward_dim)
        self.ff2 = nn.Linear(cfg.feedforward_dim, d)

    def forward(self, h: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        B, T, D = h.shape
        q, k, v = self.qkv(self.ln1(h)).split(D, dim=-1)
        q, k, v = (z.view(B, T, self.heads, D // self.heads).transpose(1, 2) for z in (q, k, v))
        att = (q @ k.transpose(-2, -1)) / math.sqrt(D // self.heads)
        att = att.masked_fill(mask, float("-inf")).softmax(dim=-1)
        h = h + self.proj((att @ v).transpose(1, 2).reshape(B, T, D))
        return h + self.ff2(F.gelu(self.ff1(self.ln2(h))))


class TinyTransformer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.config = cfg
        d = cfg.embedding_dim
        self.tok_emb = nn.Embedding(cfg.vocab_size, d)
        self.pos_emb = nn.Embedding(cfg.max_sequence_len, d)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.layer_count))
        self.ln_f = nn.LayerNorm(d)
        self.head = nn.Linear(d, cfg.vocab_size)
        self.reset_parameters()
        self.to(DTYPES[cfg.dtype])

    @torch.no_grad()
    def reset_parameters(self) -> None:
        gen = torch.Generator().manual_seed(self.config.seed)
        for name, p in self.named_parameters():
            if name.endswith("bias"):
                p.zero_()
            elif ".ln" in name or name.startswith("ln_"):
                p.fill_(1.0)
            else:
                p.copy_(torch.randn(p.shape, generator=gen) * 0.02)
        if self.config.init == "zeros":
            self.head.weight.zero_()
            self.head.bias.zero_()

    @property
    def dtype(self) -> torch.dtype:
        return self.head.weight.dtype

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """Logits ``[B, T, V]`` for a right-padded batch of ids ``[B, T]``."""
        B, T = ids.shape
        pos = torch.arange(T)
        h = self.tok_emb(ids) + self.pos_emb(pos)[None]
        mask = torch.triu(torch.ones(T, T, dtype=torch.bool), diagonal=1)
        for blk in self.blocks:
            h = blk(h, mask)
        return self.head(self.ln_f(h))

    def next_token_logprobs(self, x_ids: Sequence[int], prefixes: Sequence[Sequence[int]]) -> np.ndarray:
        """Log-distribution over the next response token for each prefix."""
        return next_token_logprobs(self, x_ids, prefixes)


class SequenceTooLongError(ValueError):
    pass


def _check_ids(cfg: ModelConfig, ids: Sequence[int], what: str) -> None:
    for i in ids:
        if not 0 <= int(i) < cfg.vocab_size:
            raise ValueError(f"{what} id {i} outside vocabulary of size {cfg.vocab_size}")


def _inputs(cfg: ModelConfig, x_ids, y_ids) -> list[int]:
    _check_ids(cfg, x_ids, "context")
    _check_ids(cfg, y_ids, "response")
    if not len(y_ids):
        raise ValueError("response must be non-empty")
    seq = list(x_ids) + [cfg.sep_id] + list(y_ids[:-1])
    if len(seq) > cfg.max_sequence_len:
        raise SequenceTooLongError(
            f"context+response length {len(seq)} exceeds max_sequence_len {cfg.max_sequence_len}")
    return seq


def batch_logprobs(model: TinyTransformer, pairs: Sequence[tuple[Sequence[int], Sequence[int]]]) -> list[torch.Tensor]:
    """Teacher-forced log G(y_t | x, y_<t) for each (x, y) pair.

    Sequences are right-padded; with a causal mask padding only sits after
    the real tokens, so results do not depend on batch composition.
    """
    cfg = model.config
    seqs = [_inputs(cfg, x, y) for x, y in pairs]
    T = max(map(len, seqs))
    ids = torch.full((len(seqs), T), cfg.pad_id, dtype=torch.long)
    for b, s in enumerate(seqs):
        ids[b, :len(s)] = torch.tensor(s, dtype=torch.long)
    logp = model(ids).log_softmax(dim=-1)
    out = []
    for b, (x, y) in enumerate(pairs):
        start = len(x)  # position of the separator predicts y[0]
        tgt = torch.tensor(list(y), dtype=torch.long)
        out.append(logp[b, start:start + len(y)].gather(-1, tgt[:, None]).squeeze(-1))
    return out


def forward_logprobs(model: TinyTransformer, x_ids: Sequence[int], y_ids: Sequence[int]) -> torch.Tensor:
    return batch_logprobs(model, [(x_ids, y_ids)])[0]


@torch.no_grad()
def next_token_logprobs(model: TinyTransformer, x_ids: Sequence[int],
                        prefixes: Sequence[Sequence[int]]) -> np.ndarray:
    cfg = model.config
    _check_ids(cfg, x_ids, "context")
    seqs = [list(x_ids) + [cfg.sep_id] + list(p) for p in prefixes]
    T = max(map(len, seqs))
    if T > cfg.max_sequence_len:
        raise SequenceTooLongError(f"decode length {T} exceeds max_sequence_len {cfg.max_sequence_len}")
    ids = torch.full((len(seqs), T), cfg.pad_id, dtype=torch.long)
    last = torch.tensor([len(s) - 1 for s in seqs])
    for b, s in enumerate(seqs):
        ids[b, :len(s)] = torch.tensor(s, dtype=torch.long)
    logits = model(ids)[torch.arange(len(seqs)), last]
    return logits.log_softmax(dim=-1).to(torch.float64).numpy()


def flat_parameters(model: nn.Module) -> np.ndarray:
    return torch.cat([p.detach().reshape(-1) for p in model.parameters()]).numpy().copy()


@torch.no_grad()
def set_flat_parameters(model: nn.Module, flat: np.ndarray) -> None:
    flat = torch.as_tensor(np.asarray(flat))
    i = 0
    for p in model.parameters():
        n = p.numel()
        p.copy_(flat[i:i + n].reshape(p.shape))
        i += n
    if i != flat.numel():
        raise ValueError("flat parameter vector has the wrong size")


class NonFiniteLossError(FloatingPointError):
    pass


def backward(model: nn.Module, loss: torch.Tensor) -> np.ndarray:
    """Gradient of a scalar ``loss`` w.r.t. all parameters, flattened."""
    if not torch.isfinite(loss).item():
        raise NonFiniteLossError(f"loss is not finite: {loss.item()!r}")
    model.zero_grad(set_to_none=False)
    loss.backward()
    return torch.cat([(p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1)
                      for p in model.parameters()]).numpy().copy()
