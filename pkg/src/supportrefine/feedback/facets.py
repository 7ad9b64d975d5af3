from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class Facet(str, Enum):
    EMPATHY = "empathy"
    SKILL = "skill"
    COHERENCE = "coherence"


FACETS = (Facet.EMPATHY, Facet.SKILL, Facet.COHERENCE)

# label -> display name, in the order shown to judges
FACET_CLASSES: dict[Facet, dict[str, str]] = {
    Facet.EMPATHY: {"no_empathy": "No Empathy", "weak_empathy": "Weak Empathy",
                    "strong_empathy": "Strong Empathy"},
    Facet.SKILL: {"mi_adherent": "MI Adherent", "mi_non_adherent": "MI Non-Adherent",
                  "other": "Other"},
    Facet.COHERENCE: {"coherent": "Coherent", "incoherent": "Incoherent"},
}
UNHELPFUL_CLASS = {
    Facet.EMPATHY: "no_empathy",
    Facet.SKILL: "mi_non_adherent",
    Facet.COHERENCE: "incoherent",
}
HELPFUL, UNHELPFUL = 1, 0


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class FacetVerdict:
    facet: Facet
    class_label: str
    unhelpful: bool = field(init=False)

    def __post_init__(self):
        facet = Facet(self.facet)
        object.__setattr__(self, "facet", facet)
        if self.class_label not in FACET_CLASSES[facet]:
            raise ValueError(f"{self.class_label!r} is not a {facet.value} class")
        object.__setattr__(self, "unhelpful", self.class_label == UNHELPFUL_CLASS[facet])

    def to_dict(self) -> dict:
        return {"facet": self.facet.value, "class_label": self.class_label, "unhelpful": self.unhelpful}

    @classmethod
    def from_dict(cls, d: dict) -> "FacetVerdict":
        return cls(Facet(d["facet"]), d["class_label"])


def aggregate(verdicts: Iterable[FacetVerdict]) -> int:
    """0 if any facet calls the response unhelpful, else 1."""
    verdicts = list(verdicts)
    facets = [v.facet for v in verdicts]
    missing = set(FACETS) - set(facets)
    if missing or len(facets) != len(FACETS):
        raise AggregationError(
            f"need exactly one verdict per facet; missing {sorted(f.value for f in missing)}, got {len(facets)}")
    return UNHELPFUL if any(v.unhelpful for v in verdicts) else HELPFUL


@dataclass(frozen=True)
class FeedbackRecord:
    instance_id: str
    candidate_index: int
    verdicts: tuple[FacetVerdict, ...]
    label: int
    judge_id: str
    prompt_version: str

    def __post_init__(self):
        object.__setattr__(self, "verdicts", tuple(self.verdicts))
        if self.label != aggregate(self.verdicts):
            raise ValueError("label disagrees with the facet verdicts")

    @classmethod
    def build(cls, instance_id, candidate_index, verdicts, judge_id, prompt_version) -> "FeedbackRecord":
        verdicts = tuple(sorted(verdicts, key=lambda v: FACETS.index(v.facet)))
        return cls(instance_id, candidate_index, verdicts, aggregate(verdicts), judge_id, prompt_version)

    def verdict(self, facet: Facet) -> Optional[FacetVerdict]:
        return next((v for v in self.verdicts if v.facet == facet), None)

    def to_dict(self) -> dict:
        return {"instance_id": self.instance_id, "candidate_index": self.candidate_index,
                "verdicts": [v.to_dict() for v in self.verdicts], "label": self.label,
                "judge_id": self.judge_id, "prompt_version": self.prompt_version}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackRecord":
        return cls(d["instance_id"], int(d["candidate_index"]),
                   tuple(FacetVerdict.from_dict(v) for v in d["verdicts"]), int(d["label"]),
                   d["judge_id"], d["prompt_version"])
