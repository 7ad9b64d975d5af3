import sys

import numpy as np
import pytest

from supportrefine.corpus import Conversation, Turn, SEEKER, SUPPORTER
from supportrefine.synthetic import ToyCorpusConfig, synthesize_toy_corpus
from supportrefine.tokenizer import fit_tokenizer


class TableModel:
    """Decoder stub: next-token log-probs looked up by prefix (default row otherwise)."""

    def __init__(self, table, default, eos_id):
        self.table = {tuple(k): np.log(np.asarray(v, float)) for k, v in table.items()}
        self.default = np.log(np.asarray(default, float))
        self.eos_id = eos_id
        self.calls = 0

    def next_token_logprobs(self, x_ids, prefixes):
        self.calls += 1
        return np.stack([self.table.get(tuple(p), self.default) for p in prefixes])


def conv(cid, *texts, start=SEEKER):
    roles = (SEEKER, SUPPORTER) if start == SEEKER else (SUPPORTER, SEEKER)
    return Conversation(cid, tuple(Turn(roles[i % 2], t) for i, t in enumerate(texts)))


@pytest.fixture(scope="session")
def toy_corpus():
    return synthesize_toy_corpus(ToyCorpusConfig(n_conversations=40), seed=3)


@pytest.fixture(scope="session")
def toy_tokenizer(toy_corpus):
    return fit_tokenizer(toy_corpus, 200)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        title, ok, detail = mod.RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
