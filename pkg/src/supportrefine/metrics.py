"""Reference-overlap metrics and paired significance testing.

Every metric takes aligned lists of candidate and reference strings
(one reference per candidate), tokenizes by lowercase whitespace split,
and reports percentages unless noted.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Mapping, Optional, Sequence

import numpy as np

BLEU_EPSILON = 1e-9


def _tok(s: str) -> list[str]:
    return s.lower().split()


def _check(candidates, references):
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(candidates: Sequence[str], references: Sequence[str], n: int) -> float:
    """Corpus BLEU with uniform weights over orders 1..n.

    Zero match counts for orders >= 2 are replaced by ``BLEU_EPSILON``.
    """
    _check(candidates, references)
    if not 1 <= n <= 4:
        raise ValueError("n must be in 1..4")
    matches, totals = np.zeros(n), np.zeros(n)
    c_len = r_len = 0
    for c, r in zip(candidates, references):
        ct, rt = _tok(c), _tok(r)
        c_len += len(ct)
        r_len += len(rt)
        for k in range(1, n + 1):
            cg, rg = ngrams(ct, k), ngrams(rt, k)
            matches[k - 1] += sum(min(v, rg[g]) for g, v in cg.items())
            totals[k - 1] += max(len(ct) - k + 1, 0)
    if c_len == 0 or matches[0] == 0:
        return 0.0
    logs = []
    for k in range(n):
        m = matches[k] if matches[k] > 0 else BLEU_EPSILON
        if totals[k] == 0:
            m, t = BLEU_EPSILON, 1.0
        else:
            t = totals[k]
        logs.append(math.log(m / t))
    bp = 1.0 if c_len > r_len else math.exp(1 - r_len / c_len)
    return 100.0 * bp * math.exp(sum(logs) / n)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Mean LCS F1 over pairs."""
    _check(candidates, references)
    if not candidates:
        return 0.0
    scores = []
    for c, r in zip(candidates, references):
        ct, rt = _tok(c), _tok(r)
        lcs = lcs_length(ct, rt)
        if lcs == 0:
            scores.append(0.0)
            continue
        p, rec = lcs / len(ct), lcs / len(rt)
        scores.append(2 * p * rec / (p + rec))
    return 100.0 * float(np.mean(scores))


_SUFFIXES = ("ingly", "edly", "ing", "ness", "ment", "ies", "ied", "ed", "ly", "es", "er", "s")


def stem(word: str) -> str:
    """Crude suffix stripper used as the stemming stage of METEOR-lite."""
    for suf in _SUFFIXES:
        if word.endswith(suf) and len(word) - len(suf) >= 3:
            return word[:-len(suf)]
    return word


def _align(ct: list[str], rt: list[str]) -> list[tuple[int, int]]:
    """Exact matches first, then stem matches; each side used at most once."""
    used_c, used_r, pairs = set(), set(), []
    for key in (lambda w: w, stem):
        for i, w in enumerate(ct):
            if i in used_c:
                continue
            for j, v in enumerate(rt):
                if j not in used_r and key(w) == key(v):
                    pairs.append((i, j))
                    used_c.add(i)
                    used_r.add(j)
                    break
    return sorted(pairs)


def meteor_lite(candidates: Sequence[str], references: Sequence[str],
                alpha: float = 0.9, gamma: float = 0.5, beta: float = 3.0) -> float:
    """METEOR without synonyms: exact + stem matching, F-mean, fragmentation penalty.

    Fragmentation is ``(chunks - 1) / matches`` so a perfect match is
    unpenalized.
    """
    _check(candidates, references)
    if not candidates:
        return 0.0
    scores = []
    for c, r in zip(candidates, references):
        ct, rt = _tok(c), _tok(r)
        pairs = _align(ct, rt)
        m = len(pairs)
        if m == 0:
            scores.append(0.0)
            continue
        p, rec = m / len(ct), m / len(rt)
        fmean = p * rec / (alpha * p + (1 - alpha) * rec)
        chunks = 1 + sum(1 for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]) if not (i1 == i0 + 1 and j1 == j0 + 1))
        penalty = gamma * ((chunks - 1) / m) ** beta
        scores.append(fmean * (1 - penalty))
    return 100.0 * float(np.mean(scores))


def cider(candidates: Sequence[str], references: Sequence[str], max_n: int = 4) -> float:
    """Mean over pairs of 10 x average-over-n tf-idf cosine similarity.

    Document frequencies come from the reference side of the whole corpus;
    ``idf = log(N) - log(max(1, df))``.  Empty vectors give cosine 0.
    """
    _check(candidates, references)
    N = len(references)
    if N == 0:
        return 0.0
    ref_grams = [[ngrams(_tok(r), n) for n in range(1, max_n + 1)] for r in references]
    df: Counter = Counter()
    for per_n in ref_grams:
        for grams in per_n:
            df.update(grams.keys())
    log_n = math.log(float(N))

    def vec(grams: Counter) -> dict:
        return {g: tf * (log_n - math.log(max(1.0, df[g]))) for g, tf in grams.items()}

    scores = []
    for c, per_n in zip(candidates, ref_grams):
        ct = _tok(c)
        total = 0.0
        for n in range(1, max_n + 1):
            vc, vr = vec(ngrams(ct, n)), vec(per_n[n - 1])
            dot = sum(v * vr.get(g, 0.0) for g, v in vc.items())
            nc = math.sqrt(sum(v * v for v in vc.values()))
            nr = math.sqrt(sum(v * v for v in vr.values()))
            total += dot / (nc * nr) if nc > 0 and nr > 0 else 0.0
        scores.append(10.0 * total / max_n)
    return float(np.mean(scores))


def load_embeddings(path) -> Optional[dict[str, np.ndarray]]:
    """Read a ``token v1 ... vD`` text file; ``None`` if the file is missing."""
    try:
        f = open(path, encoding="utf-8")
    except (FileNotFoundError, TypeError):
        return None
    table = {}
    with f:
        for line in f:
            parts = line.rstrip().split()
            if len(parts) < 2:
                continue
            table[parts[0]] = np.array([float(x) for x in parts[1:]])
    return table


def _extrema_vec(tokens, table, dim):
    vs = [table[t] for t in tokens if t in table]
    if not vs:
        return np.zeros(dim)
    m = np.stack(vs)
    idx = np.abs(m).argmax(axis=0)
    return m[idx, np.arange(dim)]


def extrema(candidates: Sequence[str], references: Sequence[str],
            table: Optional[Mapping[str, np.ndarray]]) -> Optional[float]:
    """Vector-extrema cosine; ``None`` when no embedding table is available."""
    _check(candidates, references)
    if not table or not candidates:
        return None
    dim = len(next(iter(table.values())))
    scores = []
    for c, r in zip(candidates, references):
        a, b = _extrema_vec(_tok(c), table, dim), _extrema_vec(_tok(r), table, dim)
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        scores.append(float(a @ b / (na * nb)) if na > 0 and nb > 0 else 0.0)
    return 100.0 * float(np.mean(scores))


def sentence_bleu_2(candidate: str, reference: str) -> float:
    return bleu_n([candidate], [reference], 2)


def paired_bootstrap(a: Sequence[float], b: Sequence[float], resamples: int = 1000, seed: int = 0) -> float:
    """Two-sided bootstrap p-value for ``mean(a) - mean(b)``.

    Resampled differences are re-centered on the observed one; the p-value
    is the share whose deviation is at least as large as the observed
    difference.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.shape != b.shape:
        raise ValueError("score vectors must be aligned")
    if resamples < 1000:
        raise ValueError("use at least 1000 resamples")
    d = a - b
    obs = d.mean()
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(d), size=(resamples, len(d)))
    boot = d[idx].mean(axis=1)
    return float(np.mean(np.abs(boot - obs) >= abs(obs) - 1e-12))
