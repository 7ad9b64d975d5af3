"""Facet judges: a deterministic rule oracle and a chat-completion HTTP client."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import httpx

from .. import synthetic as g
from ..corpus import SEEKER, Turn
from ..tokenizer import words
from .facets import Facet, FacetVerdict
from .prompts import UnparseableOutput, build_prompt, parse_class

log = logging.getLogger(__name__)


class AnnotationError(RuntimeError):
    def __init__(self, message: str, instance_id: Optional[str] = None):
        super().__init__(message if instance_id is None else f"{instance_id}: {message}")
        self.instance_id = instance_id


@dataclass(frozen=True)
class JudgeConfig:
    kind: str = "rule_oracle"  # "rule_oracle" | "remote"
    endpoint: Optional[str] = None
    model: Optional[str] = None
    auth_env: str = "JUDGE_API_KEY"
    timeout: float = 30.0
    max_parallelism: int = 4
    temperature: float = 0.0
    max_retries: int = 3
    prompt_version: str = "v1"
    cache_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("rule_oracle", "remote"):
            raise ValueError(f"unknown judge kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote judge requires an endpoint")
        if self.max_parallelism < 1:
            raise ValueError("max_parallelism must be positive")


class Judge:
    judge_id: str = "judge"
    prompt_version: str = "v1"
    #: whether classify() goes over the network (drives fan-out and call counting)
    remote: bool = False

    def classify(self, facet: Facet, context_turns: Sequence[Turn], response_text: str) -> FacetVerdict:
        raise NotImplementedError


def _context_facts(context_turns: Sequence[Turn]):
    toks = [w for t in context_turns for w in words(t.text)]
    requested = any(g.has_phrase(words(t.text), p)
                    for t in context_turns if t.role == SEEKER for p in g.REQUEST_PHRASES)
    return set(toks) & set(g.TOPICS), set(toks) & set(g.EMOTIONS), requested


class RuleOracleJudge(Judge):
    """Reads the markers planted by ``supportrefine.synthetic``.

    * coherence: every topic or emotion word in the response must occur
      in the context;
    * empathy: reaction -> strong; interpretation/exploration -> weak;
      a suggestion counts as weak only when the seeker asked for one;
    * skill: confrontation or unrequested advice -> MI non-adherent;
      reactions, interpretations and requested advice -> MI adherent.
    """

    judge_id = "rule_oracle"

    def classify(self, facet, context_turns, response_text):
        facet = Facet(facet)
        topics, emotions, requested = _context_facts(context_turns)
        r = words(response_text)
        rs = set(r)
        suggestion = bool(rs & set(g.SUGGESTION_MARKERS))
        reaction = bool(rs & set(g.REACTION_MARKERS))
        interpretation = bool(rs & set(g.INTERPRETATION_MARKERS))
        exploration = any(g.has_phrase(r, p) for p in g.EXPLORATION_PHRASES)
        if facet is Facet.COHERENCE:
            foreign = (rs & set(g.TOPICS)) - topics or (rs & set(g.EMOTIONS)) - emotions
            return FacetVerdict(facet, "incoherent" if foreign else "coherent")
        if facet is Facet.EMPATHY:
            if reaction:
                label = "strong_empathy"
            elif interpretation or exploration or (suggestion and requested):
                label = "weak_empathy"
            else:
                label = "no_empathy"
            return FacetVerdict(facet, label)
        if rs & set(g.CONFRONT_MARKERS) or (suggestion and not requested):
            label = "mi_non_adherent"
        elif reaction or interpretation or (suggestion and requested):
            label = "mi_adherent"
        else:
            label = "other"
        return FacetVerdict(facet, label)


def extract_text(reply: dict) -> str:
    """Pull the generated text out of common chat-completion reply shapes."""
    try:
        return reply["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        pass
    for key in ("text", "content", "output"):
        if isinstance(reply.get(key), str):
            return reply[key]
    try:
        return reply["choices"][0]["text"]
    except (KeyError, IndexError, TypeError):
        raise AnnotationError("judge reply has no text field") from None


class RemoteJudge(Judge):
    """POSTs ``{"messages": [...], "temperature": 0}`` to a chat endpoint.

    The bearer token is read from the environment variable named in the
    config, never from files or flags.  ``client`` may be injected (tests
    pass an ``httpx.Client`` over a mock transport).
    """

    remote = True

    def __init__(self, config: JudgeConfig, client: Optional[httpx.Client] = None):
        if config.kind != "remote":
            raise ValueError("RemoteJudge needs a remote JudgeConfig")
        self.config = config
        self.prompt_version = config.prompt_version
        self.judge_id = f"remote:{config.model or config.endpoint}"
        self._client = client or httpx.Client(timeout=config.timeout)
        self.calls = 0

    def _headers(self) -> dict:
        token = os.environ.get(self.config.auth_env, "")
        return {"Authorization": f"Bearer {token}"} if token else {}

    def complete(self, prompt: str) -> str:
        body = {"messages": [{"role": "user", "content": prompt}], "temperature": self.config.temperature}
        if self.config.model:
            body["model"] = self.config.model
        delay, last = 0.5, None
        for attempt in range(self.config.max_retries + 1):
            try:
                self.calls += 1
                resp = self._client.post(self.config.endpoint, json=body, headers=self._headers())
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise httpx.HTTPStatusError(f"status {resp.status_code}", request=resp.request, response=resp)
                resp.raise_for_status()
                return extract_text(resp.json())
            except (httpx.TransportError, httpx.HTTPStatusError, ValueError) as e:
                last = e
                if isinstance(e, httpx.HTTPStatusError) and 400 <= e.response.status_code < 500 \
                        and e.response.status_code != 429:
                    break
                if attempt < self.config.max_retries:
                    time.sleep(delay)
                    delay *= 2
        raise AnnotationError(f"judge request failed: {last}")

    def classify(self, facet, context_turns, response_text):
        facet = Facet(facet)
        prompt = build_prompt(facet, context_turns, response_text, self.prompt_version)
        try:
            return FacetVerdict(facet, parse_class(facet, self.complete(prompt)))
        except UnparseableOutput:
            log.info("unparseable %s verdict, retrying once", facet.value)
        return FacetVerdict(facet, parse_class(facet, self.complete(prompt)))


def make_judge(config: JudgeConfig, client: Optional[httpx.Client] = None) -> Judge:
    if config.kind == "rule_oracle":
        return RuleOracleJudge()
    return RemoteJudge(config, client)


def classify_facet(judge: Judge, context_turns: Sequence[Turn], response_text: str, facet: Facet,
                   instance_id: Optional[str] = None) -> FacetVerdict:
    try:
        return judge.classify(facet, context_turns, response_text)
    except AnnotationError as e:
        if e.instance_id is None and instance_id is not None:
            raise AnnotationError(str(e), instance_id) from e
        raise
