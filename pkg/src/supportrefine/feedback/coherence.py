"""Build a coherence classification set from a dialogue corpus.

For every sampled (context, response) pair three examples are produced:
the original (coherent), a response taken from another conversation
(incoherent) and a keyword-perturbed copy of the original (incoherent).
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..corpus import Conversation, Turn, build_instances
from ..tokenizer import words

STOPWORDS = frozenset("""
a an the i you he she it we they me my your our their his her its this that these those
am is are was were be been being do does did have has had will would can could should shall may might must
and or but if so because of to in on at for with about from by as into than then too very just
what when where why how who which not no yes any all some more most . , ? ! ' s
""".split())

# flips used when no other content word is available
ANTONYMS = {"hard": "easy", "easy": "hard", "good": "bad", "bad": "good", "better": "worse",
            "worse": "better", "happy": "sad", "sad": "happy", "more": "less", "less": "more",
            "always": "never", "never": "always", "glad": "sorry", "sorry": "glad"}


@dataclass(frozen=True)
class CoherenceExample:
    context: tuple[Turn, ...]
    response: str
    label: str  # "coherent" | "incoherent"
    variant: str  # "original" | "swap" | "perturb"
    conversation_id: str
    source_conversation_id: str

    def to_dict(self) -> dict:
        return {"context": [t.to_dict() for t in self.context], "response": self.response,
                "label": self.label, "variant": self.variant}


def content_words(text: str) -> list[str]:
    return [w for w in words(text) if w not in STOPWORDS and any(c.isalpha() for c in w)]


def perturb_keywords(response: str, context: Sequence[Turn], vocabulary: Sequence[str],
                     rng: np.random.Generator) -> str:
    """Replace one keyword of ``response`` so it no longer fits ``context``.

    Prefers a content word the response shares with the context, replacing
    it with a corpus content word that appears nowhere in the context.
    Falls back to an antonym flip, then to negation insertion.
    """
    toks = words(response)
    ctx = {w for t in context for w in words(t.text)}
    content_idx = [i for i, w in enumerate(toks) if w not in STOPWORDS and any(c.isalpha() for c in w)]
    shared = [i for i in content_idx if toks[i] in ctx]
    targets = shared or content_idx
    pool = sorted(set(vocabulary) - ctx - set(toks))
    if targets and pool:
        i = targets[int(rng.integers(len(targets)))]
        toks[i] = pool[int(rng.integers(len(pool)))]
        return " ".join(toks)
    for i, w in enumerate(toks):
        if w in ANTONYMS:
            toks[i] = ANTONYMS[w]
            return " ".join(toks)
    return " ".join(["not"] + toks)


def synthesize_coherence_data(corpus: Sequence[Conversation], n_base_pairs: int, seed: int = 0,
                              max_context_turns: int = 8) -> list[CoherenceExample]:
    if len(corpus) < 2:
        raise ValueError("need at least two conversations to swap responses across them")
    instances = build_instances(corpus, max_context_turns)
    by_conv: dict[str, list] = {}
    for inst in instances:
        by_conv.setdefault(inst.conversation_id, []).append(inst)
    if len(by_conv) < 2:
        raise ValueError("need instances from at least two conversations")
    if n_base_pairs < 1:
        raise ValueError("n_base_pairs must be positive")
    rng = np.random.default_rng(seed)
    counts = Counter(w for inst in instances for w in content_words(inst.gold_response.text))
    vocab = sorted(counts)
    picks = rng.choice(len(instances), size=n_base_pairs, replace=n_base_pairs > len(instances))
    out = []
    for idx in picks:
        inst = instances[int(idx)]
        ctx = inst.context_turns
        cid = inst.conversation_id
        out.append(CoherenceExample(ctx, inst.gold_response.text, "coherent", "original", cid, cid))
        others = [i for i, x in enumerate(instances) if x.conversation_id != cid]
        donor = instances[others[int(rng.integers(len(others)))]]
        out.append(CoherenceExample(ctx, donor.gold_response.text, "incoherent", "swap", cid,
                                    donor.conversation_id))
        pert = perturb_keywords(inst.gold_response.text, ctx, vocab, rng)
        out.append(CoherenceExample(ctx, pert, "incoherent", "perturb", cid, cid))
    return out


def write_coherence_data(examples: Sequence[CoherenceExample], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(ex.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
