"""Conversation corpora: parsing, instance construction and splitting.

A corpus file is UTF-8 JSON-lines, one conversation per line::

    {"id": "c1", "turns": [{"role": "seeker", "text": "..."},
                           {"role": "supporter", "text": "...", "strategy": "Question"}]}
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

SEEKER = "seeker"
SUPPORTER = "supporter"
ROLES = (SEEKER, SUPPORTER)

DEFAULT_MAX_CONTEXT_TURNS = 8


class CorpusError(ValueError):
    """Base class for corpus problems. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CorpusParseError(CorpusError):
    pass


class CorpusSchemaError(CorpusError):
    pass


class DuplicateIdError(CorpusError):
    pass


def normalize_text(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class Turn:
    role: str
    text: str
    strategy: Optional[str] = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise CorpusSchemaError(f"unknown role {self.role!r}")
        if not normalize_text(self.text):
            raise CorpusSchemaError("turn text is empty")

    def to_dict(self) -> dict:
        d = {"role": self.role, "text": self.text}
        if self.strategy is not None:
            d["strategy"] = self.strategy
        return d


@dataclass(frozen=True)
class Conversation:
    id: str
    turns: tuple[Turn, ...]

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        if not self.id:
            raise CorpusSchemaError("conversation id is empty")
        if not self.turns:
            raise CorpusSchemaError(f"conversation {self.id!r} has no turns")

    def to_dict(self) -> dict:
        return {"id": self.id, "turns": [t.to_dict() for t in self.turns]}


@dataclass(frozen=True)
class TrainingInstance:
    """One (context, gold response) pair."""

    instance_id: str
    context_turns: tuple[Turn, ...]
    gold_response: Turn
    conversation_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "context_turns", tuple(self.context_turns))
        if not self.context_turns:
            raise ValueError("context_turns must be non-empty")
        if self.gold_response.role != SUPPORTER:
            raise ValueError("gold response must be a supporter turn")


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        r = tuple(float(x) for x in self.ratios)
        if len(r) != 3 or any(x < 0 for x in r):
            raise ValueError("ratios must be three non-negative reals")
        if abs(sum(r) - 1.0) > 1e-9:
            raise ValueError(f"ratios must sum to 1, got {sum(r)!r}")
        object.__setattr__(self, "ratios", r)


Corpus = list  # list[Conversation]


def _turn_from_obj(obj, lineno: int) -> Turn:
    if not isinstance(obj, dict):
        raise CorpusSchemaError("turn must be an object", lineno)
    role, text = obj.get("role"), obj.get("text")
    if role not in ROLES:
        raise CorpusSchemaError(f"unknown role {role!r}", lineno)
    if not isinstance(text, str):
        raise CorpusSchemaError("turn text must be a string", lineno)
    strategy = obj.get("strategy")
    if strategy is not None and not isinstance(strategy, str):
        raise CorpusSchemaError("strategy must be a string", lineno)
    try:
        return Turn(role, text, strategy)
    except CorpusSchemaError as e:
        raise CorpusSchemaError(str(e), lineno) from None


def parse_corpus(stream: Union[IO[bytes], IO[str], bytes, str]) -> list[Conversation]:
    """Parse a JSON-lines corpus. Blank lines are ignored; order is preserved."""
    if isinstance(stream, (bytes, str)):
        data = stream
    else:
        data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    conversations: list[Conversation] = []
    ids: set[str] = set()
    for lineno, line in enumerate(io.StringIO(data), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusParseError(f"malformed JSON ({e.msg})", lineno) from None
        if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
            raise CorpusSchemaError("expected an object with a string 'id'", lineno)
        turns = obj.get("turns")
        if not isinstance(turns, list):
            raise CorpusSchemaError("'turns' must be a list", lineno)
        cid = obj["id"]
        if cid in ids:
            raise DuplicateIdError(f"duplicate conversation id {cid!r}", lineno)
        try:
            conv = Conversation(cid, tuple(_turn_from_obj(t, lineno) for t in turns))
        except CorpusSchemaError as e:
            if e.line is None:
                raise CorpusSchemaError(str(e), lineno) from None
            raise
        ids.add(cid)
        conversations.append(conv)
    return conversations


def serialize_corpus(corpus: Iterable[Conversation]) -> bytes:
    lines = [json.dumps(c.to_dict(), ensure_ascii=False, sort_keys=True) for c in corpus]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def read_corpus(path) -> list[Conversation]:
    with open(path, "rb") as f:
        return parse_corpus(f)


def write_corpus(corpus: Iterable[Conversation], path) -> None:
    with open(path, "wb") as f:
        f.write(serialize_corpus(corpus))


def build_instances(corpus: Sequence[Conversation],
                    max_context_turns: int = DEFAULT_MAX_CONTEXT_TURNS) -> list[TrainingInstance]:
    """One instance per supporter turn that has at least one preceding turn.

    The context is the most recent ``max_context_turns`` turns before it.
    """
    if max_context_turns < 1:
        raise ValueError("max_context_turns must be positive")
    out = []
    for conv in corpus:
        for i, turn in enumerate(conv.turns):
            if turn.role != SUPPORTER or i == 0:
                continue
            ctx = conv.turns[max(0, i - max_context_turns):i]
            out.append(TrainingInstance(f"{conv.id}#{i}", ctx, turn, conv.id))
    return out


def split_corpus(corpus: Sequence[Conversation], spec: SplitSpec = SplitSpec()):
    """Partition conversations into (train, valid, test).

    Sizes use largest-remainder rounding, so each differs from its exact
    share by less than one conversation. Order inside each part follows
    the original corpus order.
    """
    n = len(corpus)
    if n < 3:
        raise CorpusError(f"need at least 3 conversations to split, got {n}")
    exact = np.array(spec.ratios) * n
    sizes = np.floor(exact).astype(int)
    remainder = n - sizes.sum()
    # ties go to the earlier part; parts with ratio 0 never receive extras
    order = sorted(range(3), key=lambda k: (-(exact[k] - sizes[k]), k))
    for k in order[:remainder]:
        sizes[k] += 1
    perm = np.random.default_rng(spec.seed).permutation(n)
    bounds = np.cumsum(sizes)
    parts = []
    for lo, hi in zip([0, bounds[0], bounds[1]], bounds):
        idx = sorted(perm[lo:hi].tolist())
        parts.append([corpus[i] for i in idx])
    return tuple(parts)
