"""Model-level evaluation: reference metrics, helpfulness rates, significance."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from . import metrics as M
from .corpus import TrainingInstance
from .decode import DecodeConfig, diverse_beam_search, greedy
from .feedback.annotate import FeedbackCache, context_hash, response_hash
from .feedback.facets import FACETS, Facet, aggregate
from .feedback.judges import AnnotationError, Judge
from .feedback.prompts import UnparseableOutput
from .model import TinyTransformer
from .tokenizer import Tokenizer
from .training import encode_instances

FACET_COLUMNS = {Facet.EMPATHY: "emp.", Facet.SKILL: "skill", Facet.COHERENCE: "cohr."}
SINGLE, TEN = "single_response", "ten_responses"


@dataclass
class HelpfulnessReport:
    mode: str
    per_facet: dict[str, float]
    agg: float
    n_responses: int
    n_failed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def generate_responses(model: TinyTransformer, instances: Sequence[TrainingInstance], tok: Tokenizer,
                       mode: str = SINGLE, decode_cfg: Optional[DecodeConfig] = None) -> list[list[str]]:
    """Decoded responses per instance: one greedy reply, or K diverse-beam replies."""
    decode_cfg = decode_cfg or DecodeConfig()
    enc = encode_instances(tok, instances, model.config.max_sequence_len, decode_cfg.max_len)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for e in enc:
            if mode == SINGLE:
                out.append([greedy(model, e.x_ids, decode_cfg.max_len, alpha=decode_cfg.length_penalty,
                                   detok=tok.decode).text])
            elif mode == TEN:
                out.append([c.text for c in diverse_beam_search(model, e.x_ids, decode_cfg, detok=tok.decode)])
            else:
                raise ValueError(f"unknown mode {mode!r}")
    return out


def judge_responses(judge: Judge, instances: Sequence[TrainingInstance], responses: Sequence[Sequence[str]],
                    mode: str, cache: Optional[FeedbackCache] = None) -> HelpfulnessReport:
    """Per-facet and aggregated helpful percentages; failed judgments are excluded."""
    cache = cache if cache is not None else FeedbackCache()
    helpful = {f: 0 for f in FACETS}
    agg = n = failed = 0
    for inst, resps in zip(instances, responses):
        ch = context_hash(inst.context_turns)
        for text in resps:
            verdicts = []
            try:
                for f in FACETS:
                    key = (ch, response_hash(text), f.value, judge.prompt_version, judge.judge_id)
                    v = cache.get(key)
                    if v is None:
                        v = judge.classify(f, inst.context_turns, text)
                        cache.put(key, v)
                    verdicts.append(v)
            except (AnnotationError, UnparseableOutput, ValueError):
                failed += 1
                continue
            n += 1
            for v in verdicts:
                helpful[v.facet] += not v.unhelpful
            agg += aggregate(verdicts)
    pct = (lambda k: 100.0 * k / n) if n else (lambda k: 0.0)
    return HelpfulnessReport(mode, {FACET_COLUMNS[f]: pct(helpful[f]) for f in FACETS}, pct(agg), n, failed)


def helpful_percentage(model: TinyTransformer, instances: Sequence[TrainingInstance], tok: Tokenizer,
                       judge: Judge, mode: str = SINGLE, decode_cfg: Optional[DecodeConfig] = None,
                       cache: Optional[FeedbackCache] = None) -> HelpfulnessReport:
    return judge_responses(judge, instances, generate_responses(model, instances, tok, mode, decode_cfg), mode, cache)


def metric_report(hypotheses: Sequence[str], references: Sequence[str], embeddings=None) -> dict:
    out = {f"B-{n}": M.bleu_n(hypotheses, references, n) for n in range(1, 5)}
    out["R-L"] = M.rouge_l(hypotheses, references)
    out["METEOR-lite"] = M.meteor_lite(hypotheses, references)
    out["CIDEr"] = M.cider(hypotheses, references)
    ext = M.extrema(hypotheses, references, embeddings)
    if ext is not None:
        out["Extrema"] = ext
    return out


def evaluate_models(models: dict[str, TinyTransformer], instances: Sequence[TrainingInstance], tok: Tokenizer,
                    judge: Optional[Judge] = None, *, decode_cfg: Optional[DecodeConfig] = None,
                    cache: Optional[FeedbackCache] = None, embeddings=None, ten_responses: bool = False,
                    resamples: int = 1000, seed: int = 0) -> dict:
    """Evaluate named models on the same instances.

    Significance compares every model against the first one on per-instance
    sentence B-2 and (with a judge) per-instance aggregated helpfulness.
    """
    refs = [i.gold_response.text for i in instances]
    report = {"metrics": {}, "helpfulness": {}, "significance": {}, "corpus_size": len(instances)}
    per_inst = {}
    for name, model in models.items():
        hyps = [r[0] for r in generate_responses(model, instances, tok, SINGLE, decode_cfg)]
        report["metrics"][name] = metric_report(hyps, refs, embeddings)
        per_inst[name] = {"B-2": [M.sentence_bleu_2(h, r) for h, r in zip(hyps, refs)]}
        if judge is not None:
            hr = judge_responses(judge, instances, [[h] for h in hyps], SINGLE, cache)
            report["helpfulness"].setdefault(SINGLE, {})[name] = hr.to_dict()
            per_inst[name]["agg"] = [judge_responses(judge, [i], [[h]], SINGLE, cache).agg
                                     for i, h in zip(instances, hyps)]
            if ten_responses:
                ten = helpful_percentage(model, instances, tok, judge, TEN, decode_cfg, cache)
                report["helpfulness"].setdefault(TEN, {})[name] = ten.to_dict()
    names = list(models)
    for other in names[1:]:
        sig = {}
        for key, a in per_inst[other].items():
            sig[key] = M.paired_bootstrap(a, per_inst[names[0]][key], resamples, seed)
        report["significance"][f"{other} vs {names[0]}"] = sig
    return report


METRIC_ORDER = ("B-1", "B-2", "B-3", "B-4", "R-L", "METEOR-lite", "CIDEr", "Extrema")


def render_tables(report: dict) -> str:
    """Plain-text tables in the layout of a metrics table and a helpfulness table."""
    lines = []
    mets = report.get("metrics", {})
    if mets:
        present = next(iter(mets.values()))
        cols = [c for c in METRIC_ORDER if c in present] + sorted(set(present) - set(METRIC_ORDER))
        lines.append("Model".ljust(12) + "".join(c.rjust(13) for c in cols))
        for name, row in mets.items():
            lines.append(name.ljust(12) + "".join(f"{row[c]:13.2f}" for c in cols))
    for mode, rows in report.get("helpfulness", {}).items():
        lines.append("")
        lines.append(f"Helpful responses (%), {mode}")
        lines.append("Model".ljust(12) + "".join(c.rjust(9) for c in ("emp.", "skill", "cohr.", "agg.")))
        for name, r in rows.items():
            vals = [r["per_facet"][c] for c in ("emp.", "skill", "cohr.")] + [r["agg"]]
            lines.append(name.ljust(12) + "".join(f"{v:9.2f}" for v in vals))
    if report.get("significance"):
        lines.append("")
        for pair, sig in report["significance"].items():
            lines.append(f"{pair}: " + ", ".join(f"{k} p={v:.4f}" for k, v in sig.items()))
    return "\n".join(lines) + "\n"


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
