"""A planted-grammar stand-in for an emotional-support corpus.

Seekers mention an emotion and a topic and sometimes ask for advice.
Supporters answer from a small set of templates, some of which are
helpful and some unhelpful under the rule oracle in
``supportrefine.feedback.judges``.  In "trap" conversations (chosen by
emotion) the single most frequent gold reply is an unhelpful
confrontation while helpful replies are split across several templates,
so a likelihood-trained model decodes the unhelpful reply greedily even
though most gold replies there are helpful.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .corpus import SEEKER, SUPPORTER, Conversation, Turn, serialize_corpus
from .tokenizer import SPECIALS

EMOTIONS = ("sad", "anxious", "lonely", "angry", "stressed", "tired",
            "worried", "upset", "hopeless", "nervous")
TOPICS = ("job", "exam", "family", "friend", "partner", "money",
          "health", "school", "boss", "sister", "brother", "roommate")
TRAP_EMOTIONS = ("angry", "stressed", "tired", "nervous")

OPENERS = (
    "i feel {e} about my {t}",
    "my {t} makes me feel so {e}",
    "i am really {e} because of my {t}",
)
FOLLOW_UPS = (
    "it is hard with my {t} lately",
    "yes , i just feel {e} all the time",
    "i keep thinking about my {t}",
)
REQUESTS = ("any suggestions ?", "i do not know what to do")

# name -> template; helpfulness is decided by the oracle, not by this table
SUPPORTER_TEMPLATES = {
    "react": "i am so sorry you feel {e} about your {t}",
    "interpret": "it sounds like you feel {e} about your {t}",
    "explore": "can you tell me more about why you feel {e} about your {t} ?",
    "suggest": "maybe you could try talking to someone about your {t}",
    "inform": "problems with a {t} are very common",
    "confront": "stop complaining , everyone has problems with a {t}",
}

# empathy / skill markers read by the rule oracle
REACTION_MARKERS = ("sorry",)
INTERPRETATION_MARKERS = ("sounds", "understand")
EXPLORATION_PHRASES = (("tell", "me", "more"),)
SUGGESTION_MARKERS = ("try", "maybe")
CONFRONT_MARKERS = ("should", "stop", "complaining", "wrong")
REQUEST_PHRASES = (("any", "suggestions"), ("what", "to", "do"))


def _mix(request: bool, trap: bool) -> dict[str, float]:
    if trap:
        mix = {"confront": 0.34, "react": 0.22, "interpret": 0.22, "explore": 0.22}
    else:
        mix = {"react": 0.4, "interpret": 0.25, "explore": 0.25, "inform": 0.06, "confront": 0.04}
    if request:
        # advice is welcome: it takes share from exploration
        mix["suggest"] = 0.12
        mix["explore"] -= 0.12
    return mix


def grammar_words() -> set[str]:
    texts = list(OPENERS) + list(FOLLOW_UPS) + list(REQUESTS) + list(SUPPORTER_TEMPLATES.values())
    out = set(EMOTIONS) | set(TOPICS)
    for t in texts:
        out.update(w for w in t.split() if not w.startswith("{"))
    return out


@dataclass(frozen=True)
class ToyCorpusConfig:
    n_conversations: int = 200
    exchanges: int = 3
    request_rate: float = 0.4
    vocab_size: int = 200
    trap_emotions: tuple[str, ...] = TRAP_EMOTIONS


def _fill(template: str, emotion: str, topic: str) -> str:
    return template.format(e=emotion, t=topic)


def synthesize_toy_corpus(config: ToyCorpusConfig = ToyCorpusConfig(), seed: int = 0) -> list[Conversation]:
    """Deterministic synthetic corpus; every supporter turn has context."""
    if config.n_conversations <= 0:
        raise ValueError("n_conversations must be positive")
    if config.exchanges <= 0:
        raise ValueError("exchanges must be positive")
    needed = len(grammar_words()) + len(SPECIALS)
    if config.vocab_size < needed:
        raise ValueError(f"vocab_size {config.vocab_size} too small for the grammar ({needed} needed)")
    unknown = set(config.trap_emotions) - set(EMOTIONS)
    if unknown:
        raise ValueError(f"unknown trap emotions {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    convs = []
    for c in range(config.n_conversations):
        emotion = EMOTIONS[rng.integers(len(EMOTIONS))]
        topic = TOPICS[rng.integers(len(TOPICS))]
        trap = emotion in config.trap_emotions
        turns = []
        requested = False
        for k in range(config.exchanges):
            pool = OPENERS if k == 0 else FOLLOW_UPS
            text = _fill(pool[rng.integers(len(pool))], emotion, topic)
            if rng.random() < config.request_rate:
                text += " . " + REQUESTS[rng.integers(len(REQUESTS))]
                requested = True
            turns.append(Turn(SEEKER, text))
            mix = _mix(requested, trap)
            names = sorted(mix)
            probs = np.array([mix[n] for n in names])
            name = names[rng.choice(len(names), p=probs / probs.sum())]
            turns.append(Turn(SUPPORTER, _fill(SUPPORTER_TEMPLATES[name], emotion, topic), strategy=name))
        convs.append(Conversation(f"toy-{seed}-{c:05d}", tuple(turns)))
    return convs


def enumerate_continuations() -> list[str]:
    """Every supporter reply the grammar can produce, for any context."""
    return sorted({_fill(t, e, tp) for t in SUPPORTER_TEMPLATES.values()
                   for e in EMOTIONS for tp in TOPICS})


def corpus_digest(corpus) -> str:
    return hashlib.sha256(serialize_corpus(corpus)).hexdigest()


def has_phrase(tokens: list[str], phrase: tuple[str, ...]) -> bool:
    n = len(phrase)
    return any(tuple(tokens[i:i + n]) == phrase for i in range(len(tokens) - n + 1))
