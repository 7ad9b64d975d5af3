"""Refinement: sample candidates from the base model, label them, then
train on the pairwise ranking loss plus gold-response NLL."""
from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch

from .checkpoint import FingerprintMismatchError, ModelCheckpoint
from .corpus import TrainingInstance
from .decode import Candidate, DecodeConfig, candidate_dump_lines, diverse_beam_search
from .feedback.annotate import FeedbackCache, annotate_candidates, write_feedback
from .feedback.judges import Judge
from .losses import Hyperparams, contrastive_loss, length_normalized_logprob, total_loss
from .model import TinyTransformer, batch_logprobs
from .tokenizer import Tokenizer
from .training import EncodedInstance, encode_instances, gold_nll, optimize

log = logging.getLogger(__name__)


class RefineWarning(UserWarning):
    pass


@dataclass
class CandidateSet:
    instance_id: str
    candidates: list[Candidate]
    labels: Optional[list] = None
    P: Optional[list[float]] = None
    tokenizer_fingerprint: Optional[str] = None

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.candidates):
            raise ValueError("labels and candidates must have the same length")


@dataclass
class RefineReport:
    instances_processed: int = 0
    candidate_sets: int = 0
    mixed_label_sets: int = 0
    single_label_sets: int = 0
    total_candidates: int = 0
    unlabeled_candidates: int = 0
    duplicates_removed: int = 0
    judge_calls: int = 0
    steps: int = 0
    loss_curve: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def sample_responses(model: TinyTransformer, instances: Sequence[EncodedInstance], tok: Tokenizer,
                     cfg: DecodeConfig) -> list[CandidateSet]:
    """K diverse-beam candidates per instance; deterministic."""
    out = []
    model.eval()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for inst in instances:
            cands = diverse_beam_search(model, inst.x_ids, cfg, detok=tok.decode)
            out.append(CandidateSet(inst.instance_id, cands, tokenizer_fingerprint=tok.fingerprint()))
    return out


def write_candidates(sets: Sequence[CandidateSet], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for cs in sets:
            for line in candidate_dump_lines(cs.instance_id, cs.candidates):
                f.write(line + "\n")


def read_candidates(path) -> list[CandidateSet]:
    sets: dict[str, list] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            sets.setdefault(d["instance_id"], []).append(
                (d["candidate_index"], Candidate(tuple(d["token_ids"]), d["text"], d["model_score"], d["group_index"])))
    return [CandidateSet(iid, [c for _, c in sorted(cs, key=lambda t: t[0])]) for iid, cs in sets.items()]


def rescore_candidates(model: TinyTransformer, x_ids: Sequence[int], cs: CandidateSet, alpha: float = 1.0,
                       tokenizer_fingerprint: Optional[str] = None) -> torch.Tensor:
    """Length-normalized log-probability of each candidate under ``model``."""
    if (tokenizer_fingerprint is not None and cs.tokenizer_fingerprint is not None
            and tokenizer_fingerprint != cs.tokenizer_fingerprint):
        raise FingerprintMismatchError("candidate set was tokenized with a different tokenizer")
    lps = batch_logprobs(model, [(x_ids, c.token_ids) for c in cs.candidates])
    return torch.stack([length_normalized_logprob(lp, alpha) for lp in lps])


@dataclass(frozen=True)
class _Item:
    instance_id: str
    x_ids: tuple
    y_ids: tuple
    cand_ids: tuple = ()
    labels: tuple = ()


def _contrast_items(encoded: Sequence[EncodedInstance], sets: Sequence[CandidateSet], report: RefineReport) -> list[_Item]:
    by_id = {cs.instance_id: cs for cs in sets}
    items = []
    for e in encoded:
        cs = by_id.get(e.instance_id)
        cand_ids, labels = [], []
        if cs is not None:
            report.candidate_sets += 1
            report.total_candidates += len(cs.candidates)
            seen: dict[tuple, int] = {}
            for c, lab in zip(cs.candidates, cs.labels or [None] * len(cs.candidates)):
                if lab is None:
                    continue
                if c.token_ids in seen:
                    if seen[c.token_ids] != lab:
                        raise ValueError(f"{e.instance_id}: duplicate candidate with conflicting labels")
                    report.duplicates_removed += 1
                    continue
                seen[c.token_ids] = lab
                cand_ids.append(c.token_ids)
                labels.append(int(lab))
            if len(set(labels)) == 2:
                report.mixed_label_sets += 1
            else:
                report.single_label_sets += 1
            if len(cand_ids) < 2:
                cand_ids, labels = [], []
        items.append(_Item(e.instance_id, e.x_ids, e.y_ids, tuple(cand_ids), tuple(labels)))
    return items


def _make_loss_fn(hp: Hyperparams):
    def loss_fn(model, batch):
        l_gen = gold_nll(model, batch)
        n_h = sum(sum(it.labels) for it in batch)
        n_u = sum(len(it.labels) - sum(it.labels) for it in batch)
        if hp.beta_cl == 0:
            total = total_loss(0.0, l_gen, 0.0, hp.beta_gen) if hp.beta_gen != 1 else l_gen
            return total, {"l_cl": 0.0, "l_gen": float(l_gen.item()), "n_helpful": n_h, "n_unhelpful": n_u}
        terms = []
        for it in batch:
            if it.cand_ids:
                lps = batch_logprobs(model, [(it.x_ids, c) for c in it.cand_ids])
                P = torch.stack([length_normalized_logprob(lp, hp.alpha_length_penalty) for lp in lps])
                terms.append(contrastive_loss(P, it.labels, hp.lambda_margin, hp.pair_normalizer))
            else:
                terms.append(torch.zeros((), dtype=l_gen.dtype))
        l_cl = torch.stack(terms).mean()
        total = total_loss(l_cl, l_gen, hp.beta_cl, hp.beta_gen)
        return total, {"l_cl": float(l_cl.item()), "l_gen": float(l_gen.item()),
                       "n_helpful": n_h, "n_unhelpful": n_u}
    return loss_fn


def refine(base: ModelCheckpoint, instances: Sequence[TrainingInstance], tok: Tokenizer, judge: Judge,
           hp: Hyperparams = Hyperparams(), decode_cfg: Optional[DecodeConfig] = None, *,
           batch_size: int = 1, cache: Optional[FeedbackCache] = None,
           candidate_sets: Optional[Sequence[CandidateSet]] = None, rounds: int = 1,
           loss_log_path=None, feedback_path=None, max_parallelism: int = 1):
    """Refine ``base`` and return ``(refined checkpoint, RefineReport)``.

    Candidates are drawn once per round from the model at the start of the
    round (round one: the base model) and stay fixed while their scores are
    recomputed under the parameters being trained.  ``base`` is not
    modified.
    """
    t0 = time.perf_counter()
    if base.tokenizer_fingerprint and base.tokenizer_fingerprint != tok.fingerprint():
        raise FingerprintMismatchError("base checkpoint was trained with a different tokenizer")
    if decode_cfg is None:
        decode_cfg = DecodeConfig(K=hp.K, group_count=hp.K, beam_width_per_group=1,
                                  length_penalty=hp.alpha_length_penalty)
    cfg = base.config
    encoded = encode_instances(tok, instances, cfg.max_sequence_len, decode_cfg.max_len)
    model = base.build_model()
    report = RefineReport(instances_processed=len(encoded))
    loss_log = open(loss_log_path, "w", encoding="utf-8") if loss_log_path else None
    step_offset = 0
    try:
        for r in range(rounds):
            if r > 0 or candidate_sets is None:
                sets = sample_responses(model, encoded, tok, decode_cfg)
            else:
                sets = list(candidate_sets)
            inst_by_id = {i.instance_id: i for i in instances}
            missing = [cs for cs in sets if cs.instance_id not in inst_by_id]
            if missing:
                raise ValueError(f"candidate set for unknown instance {missing[0].instance_id}")
            ann = annotate_candidates(judge, [inst_by_id[cs.instance_id] for cs in sets], sets, cache,
                                      max_parallelism=max_parallelism)
            report.unlabeled_candidates += ann.unlabeled
            report.judge_calls += ann.judge_calls
            if feedback_path is not None and r == 0:
                write_feedback(ann.records, feedback_path)
            items = _contrast_items(encoded, ann.candidate_sets, report)
            if not any(it.cand_ids and len(set(it.labels)) == 2 for it in items):
                msg = "no candidate set has mixed labels; refinement reduces to likelihood training"
                warnings.warn(msg, RefineWarning, stacklevel=2)
                report.warnings.append(msg)

            def on_step(rec, offset=step_offset):
                rec = {"step": rec["step"] + offset, "l_cl": rec["l_cl"], "l_gen": rec["l_gen"],
                       "total": rec["total"], "n_helpful": rec["n_helpful"], "n_unhelpful": rec["n_unhelpful"]}
                report.loss_curve.append(rec)
                if loss_log is not None:
                    loss_log.write(json.dumps(rec, sort_keys=True) + "\n")

            model.train()
            hist = optimize(model, items, _make_loss_fn(hp), lr=hp.learning_rate, epochs=hp.epochs,
                            batch_size=batch_size, seed=hp.seed + r, on_step=on_step)
            step_offset += len(hist)
            model.eval()
    finally:
        if loss_log is not None:
            loss_log.close()
    report.steps = step_offset
    report.wall_time = time.perf_counter() - t0
    meta = {"stage": "refine", "hyperparams": hp.to_dict(), "decode": asdict(decode_cfg),
            "batch_size": batch_size, "rounds": rounds, "judge_id": judge.judge_id,
            "base_metadata": base.metadata}
    return ModelCheckpoint.from_model(model, tok.fingerprint(), meta), report
