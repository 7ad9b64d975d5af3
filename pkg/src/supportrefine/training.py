"""Maximum-likelihood training of the base model and the shared optimizer loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .checkpoint import ModelCheckpoint
from .corpus import TrainingInstance
from .losses import nll_loss
from .model import TinyTransformer, batch_logprobs
from .tokenizer import Tokenizer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodedInstance:
    instance_id: str
    x_ids: tuple[int, ...]
    y_ids: tuple[int, ...]


def encode_instances(tok: Tokenizer, instances: Sequence[TrainingInstance],
                     max_sequence_len: int, max_response_len: Optional[int] = None) -> list[EncodedInstance]:
    """Encode (context, response) pairs so that each fits the model.

    Responses keep their ``<eos>``; overlong responses are cut (the cut
    copy has no ``<eos>``).  Contexts lose their oldest turns until a
    response of ``max_response_len`` tokens would still fit, so the same
    encoding serves decoding.
    """
    out = []
    cap = max_sequence_len // 2 if max_response_len is None else max_response_len
    for inst in instances:
        y = tok.encode_response(inst.gold_response.text)[:cap]
        x = tok.encode_context(inst.context_turns, max_len=max_sequence_len - cap)
        out.append(EncodedInstance(inst.instance_id, tuple(x), tuple(y)))
    return out


class TrainingDivergedError(FloatingPointError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


def gold_nll(model: TinyTransformer, batch: Sequence[EncodedInstance]) -> torch.Tensor:
    """Mean over the batch of per-instance length-normalized NLL."""
    lps = batch_logprobs(model, [(e.x_ids, e.y_ids) for e in batch])
    return torch.stack([nll_loss(lp) for lp in lps]).mean()


LossFn = Callable[[TinyTransformer, list], tuple[torch.Tensor, dict]]


def optimize(model: TinyTransformer, items: Sequence, loss_fn: LossFn, *, lr: float, epochs: int,
             batch_size: int, seed: int, on_step: Optional[Callable[[dict], None]] = None) -> list[dict]:
    """Adam over shuffled mini-batches. Returns one record per step.

    Batch order depends only on ``seed`` and ``len(items)``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    history, step = [], 0
    for epoch in range(epochs):
        order = rng.permutation(len(items))
        for lo in range(0, len(items), batch_size):
            batch = [items[i] for i in order[lo:lo + batch_size]]
            loss, stats = loss_fn(model, batch)
            if not torch.isfinite(loss).item():
                raise TrainingDivergedError("loss became non-finite", {
                    "epoch": epoch, "step": step, "loss": float(loss.item()),
                    "batch": [getattr(b, "instance_id", None) for b in batch],
                    "recent": [h["total"] for h in history[-5:]],
                })
            opt.zero_grad(set_to_none=False)
            loss.backward()
            opt.step()
            rec = {"epoch": epoch, "step": step, "total": float(loss.item()), **stats}
            history.append(rec)
            if on_step is not None:
                on_step(rec)
            step += 1
    return history


def train_mle(model: TinyTransformer, instances: Sequence[EncodedInstance], *, lr: float = 3e-4,
              epochs: int = 10, batch_size: int = 16, seed: int = 0,
              tokenizer_fingerprint: str = "") -> ModelCheckpoint:
    """Train ``model`` in place on gold responses and return its checkpoint.

    Per-epoch mean training loss is kept in ``metadata["epoch_loss"]``.
    """
    if not instances:
        raise ValueError("no training instances")

    def loss_fn(m, batch):
        loss = gold_nll(m, batch)
        return loss, {"l_gen": float(loss.item())}

    model.train()
    history = optimize(model, list(instances), loss_fn, lr=lr, epochs=epochs,
                       batch_size=batch_size, seed=seed)
    epoch_loss = []
    for e in range(epochs):
        vals = [h["total"] for h in history if h["epoch"] == e]
        epoch_loss.append(float(np.mean(vals)))
        log.info("epoch %d mean L_gen %.4f", e, epoch_loss[-1])
    model.eval()
    meta = {"stage": "mle", "lr": lr, "epochs": epochs, "batch_size": batch_size,
            "seed": seed, "instances": len(instances), "epoch_loss": epoch_loss}
    return ModelCheckpoint.from_model(model, tokenizer_fingerprint, meta)


@torch.no_grad()
def mean_gold_nll(model: TinyTransformer, instances: Sequence[EncodedInstance], batch_size: int = 64) -> float:
    vals = []
    for lo in range(0, len(instances), batch_size):
        batch = instances[lo:lo + batch_size]
        vals.extend(float(nll_loss(lp)) for lp in batch_logprobs(model, [(e.x_ids, e.y_ids) for e in batch]))
    return float(np.mean(vals))
