"""Labeling candidate sets with multifaceted feedback, with a persistent cache."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..corpus import Turn
from .facets import FACETS, Facet, FacetVerdict, FeedbackRecord
from .judges import AnnotationError, Judge
from .prompts import UnparseableOutput

log = logging.getLogger(__name__)


def context_hash(turns: Sequence[Turn]) -> str:
    blob = json.dumps([[t.role, " ".join(t.text.split())] for t in turns], separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def response_hash(text: str) -> str:
    return hashlib.sha256(" ".join(text.split()).encode("utf-8")).hexdigest()


class FeedbackCache:
    """Append-only JSON-lines store of facet verdicts.

    Each line carries its key fields (context hash, response hash, facet,
    prompt version, judge id) and the verdict.  Lines are flushed and
    fsynced before ``put`` returns, so an interrupted run resumes from
    whatever was written.  ``path=None`` keeps the cache in memory.
    """

    def __init__(self, path=None):
        self.path = path
        self._lock = threading.Lock()
        self._entries: dict[tuple, FacetVerdict] = {}
        if path is not None and os.path.exists(path):
            with open(path, encoding="utf-8") as f:
                for line in f:
                    if not line.strip():
                        continue
                    try:
                        d = json.loads(line)
                    except json.JSONDecodeError:
                        log.warning("skipping torn cache line in %s", path)
                        continue
                    key = (d["context_hash"], d["response_hash"], d["facet"], d["prompt_version"], d["judge_id"])
                    self._entries[key] = FacetVerdict(Facet(d["facet"]), d["class_label"])

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: tuple) -> Optional[FacetVerdict]:
        return self._entries.get(key)

    def put(self, key: tuple, verdict: FacetVerdict) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = verdict
            if self.path is None:
                return
            line = json.dumps({"context_hash": key[0], "response_hash": key[1], "facet": key[2],
                               "prompt_version": key[3], "judge_id": key[4],
                               "class_label": verdict.class_label, "unhelpful": verdict.unhelpful},
                              sort_keys=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()
                os.fsync(f.fileno())


@dataclass
class AnnotationResult:
    candidate_sets: list
    records: list[FeedbackRecord]
    unlabeled: int = 0
    judge_calls: int = 0
    failures: list[str] = field(default_factory=list)


def annotate_candidates(judge: Judge, instances: Sequence, candidate_sets: Sequence,
                        cache: Optional[FeedbackCache] = None, max_parallelism: int = 1) -> AnnotationResult:
    """Label every candidate of every set.

    ``instances`` and ``candidate_sets`` are aligned; each instance needs
    ``context_turns`` and each set needs ``instance_id``, ``candidates``
    (with ``.text``) and a ``labels`` field.  Candidates whose judge calls
    fail get label ``None`` and no record.
    """
    if len(instances) != len(candidate_sets):
        raise ValueError("instances and candidate_sets must be aligned")
    cache = cache if cache is not None else FeedbackCache()
    pv = judge.prompt_version
    tasks: dict[tuple, tuple] = {}
    for inst, cs in zip(instances, candidate_sets):
        ch = context_hash(inst.context_turns)
        for cand in cs.candidates:
            rh = response_hash(cand.text)
            for facet in FACETS:
                key = (ch, rh, facet.value, pv, judge.judge_id)
                if cache.get(key) is None and key not in tasks:
                    tasks[key] = (inst, cand.text, facet)

    errors: dict[tuple, str] = {}

    def run(item):
        key, (inst, text, facet) = item
        try:
            cache.put(key, judge.classify(facet, inst.context_turns, text))
        except (AnnotationError, UnparseableOutput, ValueError) as e:
            errors[key] = f"{inst.instance_id}: {e}"

    items = list(tasks.items())
    workers = max_parallelism if judge.remote else 1
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, items))
    else:
        for it in items:
            run(it)

    out_sets, records, unlabeled = [], [], 0
    for inst, cs in zip(instances, candidate_sets):
        ch = context_hash(inst.context_turns)
        labels = []
        for k, cand in enumerate(cs.candidates):
            rh = response_hash(cand.text)
            verdicts = [cache.get((ch, rh, f.value, pv, judge.judge_id)) for f in FACETS]
            if any(v is None for v in verdicts):
                labels.append(None)
                unlabeled += 1
                continue
            rec = FeedbackRecord.build(cs.instance_id, k, verdicts, judge.judge_id, pv)
            records.append(rec)
            labels.append(rec.label)
        out_sets.append(dataclasses.replace(cs, labels=labels))
    failures = sorted(errors.values())
    if unlabeled:
        log.warning("%d candidates left unlabeled after judge failures", unlabeled)
    return AnnotationResult(out_sets, records, unlabeled, len(items), failures)


def write_feedback(records: Sequence[FeedbackRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_feedback(path) -> list[FeedbackRecord]:
    with open(path, encoding="utf-8") as f:
        return [FeedbackRecord.from_dict(json.loads(line)) for line in f if line.strip()]
