"""Greedy, beam and diverse (Hamming-penalized, grouped) beam decoding.

Decoders only need an object with ``next_token_logprobs(x_ids, prefixes)``
returning a ``[len(prefixes), V]`` array of log-probabilities.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .tokenizer import EOS


class LogProbModel(Protocol):
    def next_token_logprobs(self, x_ids: Sequence[int], prefixes: Sequence[Sequence[int]]) -> np.ndarray: ...


class DecodeWarning(UserWarning):
    """Fewer distinct candidates than requested."""


@dataclass(frozen=True)
class DecodeConfig:
    K: int = 10
    group_count: int = 10
    beam_width_per_group: int = 1
    diversity_strength: float = 0.5
    max_len: int = 20
    length_penalty: float = 1.0

    def __post_init__(self):
        if min(self.K, self.group_count, self.beam_width_per_group, self.max_len) < 1:
            raise ValueError("K, group_count, beam_width_per_group and max_len must be positive")
        if self.K > self.group_count * self.beam_width_per_group:
            raise ValueError("K exceeds group_count * beam_width_per_group")
        if self.diversity_strength < 0:
            raise ValueError("diversity_strength must be non-negative")


@dataclass(frozen=True)
class Candidate:
    token_ids: tuple[int, ...]
    text: str
    model_score: float
    group_index: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _score(logprob_sum: float, length: int, alpha: float) -> float:
    return logprob_sum / (length ** alpha)


def _model_eos(model, eos_id):
    if eos_id is not None:
        return eos_id
    cfg = getattr(model, "config", None)
    return getattr(cfg, "eos_id", EOS)


def greedy(model: LogProbModel, x_ids: Sequence[int], max_len: int, *, alpha: float = 1.0,
           eos_id: Optional[int] = None, detok=None) -> Candidate:
    """Argmax decoding; ties go to the lowest token id."""
    eos_id = _model_eos(model, eos_id)
    seq, total = [], 0.0
    while len(seq) < max_len:
        lp = model.next_token_logprobs(x_ids, [seq])[0]
        tok = int(np.argmax(lp))
        seq.append(tok)
        total += float(lp[tok])
        if tok == eos_id:
            break
    return Candidate(tuple(seq), detok(seq) if detok else "", _score(total, len(seq), alpha))


def beam_search(model: LogProbModel, x_ids: Sequence[int], width: int, max_len: int,
                length_penalty: float = 1.0, *, eos_id: Optional[int] = None, detok=None) -> Candidate:
    """Standard beam search; returns the best finished hypothesis.

    Alive beams are ranked by raw cumulative log-probability; finished
    hypotheses are compared by the length-adjusted score.
    """
    cands = _grouped_beam(model, x_ids, groups=1, width=width, max_len=max_len,
                          strength=0.0, alpha=length_penalty, eos_id=_model_eos(model, eos_id))[0]
    seq, total = max(cands, key=lambda c: (_score(c[1], len(c[0]), length_penalty), [-t for t in c[0]]))
    return Candidate(tuple(seq), detok(seq) if detok else "", _score(total, len(seq), length_penalty))


def _grouped_beam(model, x_ids, *, groups, width, max_len, strength, alpha, eos_id):
    """Run grouped beam search; returns finished (tokens, logprob_sum) per group."""
    alive = [[((), 0.0)] for _ in range(groups)]
    finished: list[list[tuple[tuple[int, ...], float]]] = [[] for _ in range(groups)]
    for step in range(max_len):
        flat = [(g, b) for g in range(groups) for b in range(len(alive[g]))]
        if not flat:
            break
        lp_all = model.next_token_logprobs(x_ids, [list(alive[g][b][0]) for g, b in flat])
        row = {gb: i for i, gb in enumerate(flat)}
        V = lp_all.shape[1]
        counts = np.zeros(V)  # tokens chosen at this step by earlier groups
        for g in range(groups):
            if not alive[g]:
                continue
            rows = np.stack([lp_all[row[(g, b)]] for b in range(len(alive[g]))])
            base = np.array([s for _, s in alive[g]])[:, None] + rows
            aug = base - strength * counts[None, :]
            # stable ordering: by augmented score, then beam index, then token id
            order = np.lexsort((np.tile(np.arange(V), len(alive[g])),
                                np.repeat(np.arange(len(alive[g])), V), -aug.reshape(-1)))
            new_alive = []
            for flat_idx in order[:width]:
                b, tok = divmod(int(flat_idx), V)
                seq = alive[g][b][0] + (tok,)
                score = float(base[b, tok])
                counts[tok] += 1
                if tok == eos_id or len(seq) == max_len:
                    finished[g].append((seq, score))
                else:
                    new_alive.append((seq, score))
            alive[g] = new_alive
    for g in range(groups):
        finished[g].extend(alive[g])
    return finished


def diverse_beam_groups(model: LogProbModel, x_ids: Sequence[int], cfg: DecodeConfig, *,
                        eos_id: Optional[int] = None) -> list[list[tuple[tuple[int, ...], float]]]:
    """Finished hypotheses per group, each as (token_ids, logprob_sum)."""
    return _grouped_beam(model, x_ids, groups=cfg.group_count, width=cfg.beam_width_per_group,
                         max_len=cfg.max_len, strength=cfg.diversity_strength,
                         alpha=cfg.length_penalty, eos_id=_model_eos(model, eos_id))


def diverse_beam_search(model: LogProbModel, x_ids: Sequence[int], cfg: DecodeConfig, *,
                        eos_id: Optional[int] = None, detok=None) -> list[Candidate]:
    """K candidates sorted by length-adjusted score.

    Each group contributes its best distinct hypothesis first, then second
    bests, and so on.  If fewer than K distinct sequences exist the list is
    padded with copies of the best one and a ``DecodeWarning`` is issued.
    """
    alpha = cfg.length_penalty
    groups = diverse_beam_groups(model, x_ids, cfg, eos_id=eos_id)
    ranked = [sorted(fin, key=lambda c: (-_score(c[1], len(c[0]), alpha), c[0])) for fin in groups]
    chosen, seen = [], set()
    depth = 0
    while len(chosen) < cfg.K and any(depth < len(r) for r in ranked):
        for g, r in enumerate(ranked):
            if depth < len(r) and r[depth][0] not in seen and len(chosen) < cfg.K:
                seen.add(r[depth][0])
                chosen.append((r[depth], g))
        depth += 1
    if not chosen:
        raise RuntimeError("decoding produced no hypotheses")
    chosen.sort(key=lambda c: (-_score(c[0][1], len(c[0][0]), alpha), c[1]))
    if len(chosen) < cfg.K:
        warnings.warn(f"only {len(chosen)} distinct candidates for K={cfg.K}", DecodeWarning, stacklevel=2)
        chosen += [chosen[0]] * (cfg.K - len(chosen))
    return [Candidate(tuple(seq), detok(list(seq)) if detok else "", _score(s, len(seq), alpha), g)
            for (seq, s), g in chosen]


def candidate_dump_lines(instance_id: str, candidates: Sequence[Candidate]) -> list[str]:
    return [json.dumps({"instance_id": instance_id, "candidate_index": k, "text": c.text,
                        "token_ids": list(c.token_ids), "model_score": c.model_score,
                        "group_index": c.group_index}, sort_keys=True)
            for k, c in enumerate(candidates)]
