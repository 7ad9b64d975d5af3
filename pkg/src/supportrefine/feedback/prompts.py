"""Judge prompt templates and output parsing."""
from __future__ import annotations

import re
from typing import Sequence

from ..corpus import SEEKER, Turn
from .facets import FACET_CLASSES, Facet

PROMPT_VERSIONS = ("v1",)


class UnknownPromptVersion(ValueError):
    pass


class UnparseableOutput(ValueError):
    pass


_TASKS_V1 = {
    Facet.EMPATHY: (
        "Decide how much empathy the supporter's response expresses toward the help-seeker. "
        "Consider emotional reactions (warmth, compassion, concern), interpretations "
        "(understanding of the seeker's feelings and experiences) and explorations "
        "(gently asking about feelings or experiences the seeker has not stated). "
        "Responses that only give advice, only state facts, or are offensive show no empathy. "
        "Exception: if the help-seeker asked for information or suggestions, explicitly or "
        "implicitly, a response offering pertinent information or suggestions counts as "
        "weak or strong empathy."
    ),
    Facet.SKILL: (
        "Classify the supporter's response with motivational interviewing codes. "
        "MI Adherent responses support the seeker with empathic, compassionate or affirming "
        "statements, reflections, or advice given with permission. "
        "MI Non-Adherent responses argue, confront, or give advice without permission. "
        "Everything else, such as closed questions or neutral statements, is Other."
    ),
    Facet.COHERENCE: (
        "Decide whether the supporter's response is coherent with the conversation. "
        "A response is incoherent if it belongs to a different conversation, or if its "
        "keywords or key information contradict or change the topic of the context."
    ),
}


def build_prompt(facet: Facet, context_turns: Sequence[Turn], response_text: str,
                 prompt_version: str = "v1") -> str:
    """Deterministic judge prompt asking for exactly one class name."""
    if prompt_version not in PROMPT_VERSIONS:
        raise UnknownPromptVersion(prompt_version)
    if not response_text.strip():
        raise ValueError("response must be non-empty")
    facet = Facet(facet)
    options = "\n".join(f"- {name}" for name in FACET_CLASSES[facet].values())
    transcript = "\n".join(
        f"{'Help-seeker' if t.role == SEEKER else 'Supporter'}: {' '.join(t.text.split())}"
        for t in context_turns)
    return (
        "### Task\n"
        f"{_TASKS_V1[facet]}\n\n"
        "### Classes\n"
        f"{options}\n\n"
        "### Conversation\n"
        f"{transcript}\n\n"
        "### Supporter's response\n"
        f"Supporter: {' '.join(response_text.split())}\n\n"
        "### Response class\n"
        "Answer with exactly one class name from the list above.\n"
        "Class:"
    )


def _norm(s: str) -> str:
    s = re.sub(r"[_\-]+", " ", s.lower())
    return " ".join(re.sub(r"[^a-z0-9 ]+", " ", s).split())


def _aliases(facet: Facet) -> list[tuple[str, str]]:
    out = []
    for label, display in FACET_CLASSES[facet].items():
        names = {_norm(label), _norm(display)}
        if label == "other":
            names.add("others")
        out.extend((n, label) for n in names)
    return out


def parse_class(facet: Facet, raw: str) -> str:
    """Map judge output to a class label of ``facet``.

    A whole-output match wins; otherwise the earliest whole-word occurrence
    of any class name, preferring the longer name at the same position.
    """
    facet = Facet(facet)
    text = _norm(raw)
    if not text:
        raise UnparseableOutput("empty judge output")
    aliases = _aliases(facet)
    for name, label in aliases:
        if text == name:
            return label
    best = None
    for name, label in aliases:
        m = re.search(rf"\b{re.escape(name)}\b", text)
        if m and (best is None or (m.start(), -len(name)) < best[0]):
            best = ((m.start(), -len(name)), label)
    if best is None:
        raise UnparseableOutput(f"no {facet.value} class found in {raw[:80]!r}")
    return best[1]
