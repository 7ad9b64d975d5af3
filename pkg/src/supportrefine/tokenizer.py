"""Word-level, lowercasing tokenizer with fixed special tokens."""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from typing import Iterable, Sequence

from .corpus import SEEKER, Conversation, Turn

PAD, BOS, EOS, UNK, SEEKER_MARK, SUPPORTER_MARK, SEP = range(7)
SPECIALS = {
    "pad": "<pad>",
    "bos": "<bos>",
    "eos": "<eos>",
    "unk": "<unk>",
    "seeker": "<seeker>",
    "supporter": "<supporter>",
    "sep": "<sep>",
}
_SPECIAL_ORDER = ("pad", "bos", "eos", "unk", "seeker", "supporter", "sep")


def words(text: str) -> list[str]:
    return text.lower().split()


class Tokenizer:
    """Maps lowercased whitespace tokens to contiguous ids.

    Ids ``0..6`` are the special tokens (see ``SPECIALS``); words follow.
    """

    def __init__(self, vocab: Sequence[str]):
        self.itos = [SPECIALS[k] for k in _SPECIAL_ORDER] + list(vocab)
        self.stoi = {}
        for i, tok in enumerate(self.itos):
            if tok in self.stoi:
                raise ValueError(f"duplicate vocabulary entry {tok!r}")
            self.stoi[tok] = i

    @property
    def vocab(self) -> list[str]:
        return self.itos[len(SPECIALS):]

    def __len__(self) -> int:
        return len(self.itos)

    @property
    def vocab_size(self) -> int:
        return len(self.itos)

    def encode(self, text: str) -> list[int]:
        return [self.stoi.get(w, UNK) for w in words(text)]

    def decode(self, ids: Iterable[int], skip_special: bool = True) -> str:
        out = []
        for i in ids:
            i = int(i)
            if i == EOS and skip_special:
                break
            if skip_special and i in (PAD, BOS, SEP, SEEKER_MARK, SUPPORTER_MARK):
                continue
            out.append(self.itos[i])
        return " ".join(out)

    def encode_response(self, text: str) -> list[int]:
        return self.encode(text) + [EOS]

    def encode_context(self, turns: Sequence[Turn], max_len: int | None = None) -> list[int]:
        """``<bos>`` followed by role marker + words for each turn.

        When ``max_len`` is given, whole turns are dropped from the front
        (and finally words) until the encoding fits.
        """
        pieces = [[SEEKER_MARK if t.role == SEEKER else SUPPORTER_MARK] + self.encode(t.text)
                  for t in turns]
        if max_len is not None:
            while len(pieces) > 1 and 1 + sum(map(len, pieces)) > max_len:
                pieces.pop(0)
            if pieces and 1 + len(pieces[0]) > max_len:
                pieces[0] = pieces[0][len(pieces[0]) - (max_len - 1):]
        return [BOS] + [i for p in pieces for i in p]

    def to_dict(self) -> dict:
        return {"specials": {k: SPECIALS[k] for k in _SPECIAL_ORDER}, "vocab": self.vocab}

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Tokenizer":
        with open(path, encoding="utf-8") as f:
            d = json.load(f)
        if d.get("specials") != {k: SPECIALS[k] for k in _SPECIAL_ORDER}:
            raise ValueError("tokenizer file has unexpected special tokens")
        return cls(d["vocab"])


def fit_tokenizer(corpus: Sequence[Conversation], max_vocab: int) -> Tokenizer:
    """Word vocabulary by descending frequency, ties broken lexicographically.

    ``max_vocab`` counts the special tokens.
    """
    if max_vocab < len(SPECIALS) + 1:
        raise ValueError(f"max_vocab must be at least {len(SPECIALS) + 1}")
    if not corpus:
        raise ValueError("cannot fit a tokenizer on an empty corpus")
    counts = Counter(w for conv in corpus for t in conv.turns for w in words(t.text))
    specials = set(SPECIALS.values())
    ranked = sorted((w for w in counts if w not in specials), key=lambda w: (-counts[w], w))
    return Tokenizer(ranked[:max_vocab - len(SPECIALS)])
