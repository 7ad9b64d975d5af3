import json

import pytest
from hypothesis import given, settings, strategies as st

from supportrefine.corpus import (SEEKER, SUPPORTER, Conversation, CorpusParseError, CorpusSchemaError,
                                  DuplicateIdError, SplitSpec, Turn, build_instances, parse_corpus,
                                  serialize_corpus, split_corpus)
from supportrefine.feedback import FACETS, RuleOracleJudge, aggregate
from supportrefine.synthetic import (ToyCorpusConfig, corpus_digest, enumerate_continuations,
                                     synthesize_toy_corpus)
from supportrefine.tokenizer import UNK, fit_tokenizer

from conftest import conv


def _line(cid, turns):
    return json.dumps({"id": cid, "turns": [{"role": r, "text": t} for r, t in turns]})


def test_parse_single_conversation():
    data = _line("c1", [("seeker", "hi"), ("supporter", "hello"), ("seeker", "bye")]) + "\n"
    corpus = parse_corpus(data.encode())
    assert len(corpus) == 1 and len(corpus[0].turns) == 3
    assert [t.role for t in corpus[0].turns] == [SEEKER, SUPPORTER, SEEKER]


def test_unknown_role_names_line():
    data = _line("c1", [("helper", "hi")])
    with pytest.raises(CorpusSchemaError) as e:
        parse_corpus(data)
    assert e.value.line == 1


def test_malformed_json_names_line():
    data = _line("c1", [("seeker", "a"), ("supporter", "b")]) + "\n{not json\n"
    with pytest.raises(CorpusParseError) as e:
        parse_corpus(data)
    assert e.value.line == 2


def test_duplicate_id():
    lines = [_line(f"c{i}", [("seeker", "a"), ("supporter", "b")]) for i in range(9)]
    lines.append(_line("c4", [("seeker", "a"), ("supporter", "b")]))
    with pytest.raises(DuplicateIdError):
        parse_corpus("\n".join(lines))


def test_build_instances_examples():
    c = conv("x", "s1", "p1", "s2", "p2")
    inst = build_instances([c], 8)
    assert [[t.text for t in i.context_turns] for i in inst] == [["s1"], ["s1", "p1", "s2"]]
    assert [i.gold_response.text for i in inst] == ["p1", "p2"]
    assert build_instances([conv("y", "p1", "s1", start=SUPPORTER)], 8) == []
    short = build_instances([c], 1)
    assert [t.text for t in short[1].context_turns] == ["s2"]


def test_build_instances_count_matches_supporter_turns(toy_corpus):
    expected = sum(1 for c in toy_corpus for i, t in enumerate(c.turns) if t.role == SUPPORTER and i > 0)
    assert len(build_instances(toy_corpus)) == expected


def _convs(n):
    return [conv(f"c{i:03d}", f"s {i}", f"p {i}") for i in range(n)]


def test_split_sizes_and_determinism():
    corpus = _convs(10)
    a = split_corpus(corpus, SplitSpec((0.8, 0.1, 0.1), seed=7))
    b = split_corpus(corpus, SplitSpec((0.8, 0.1, 0.1), seed=7))
    assert tuple(map(len, a)) == (8, 1, 1)
    assert [serialize_corpus(p) for p in a] == [serialize_corpus(p) for p in b]


def test_split_degenerate_ratio():
    parts = split_corpus(_convs(100), SplitSpec((1.0, 0.0, 0.0), seed=0))
    assert tuple(map(len, parts)) == (100, 0, 0)


def test_split_too_small():
    with pytest.raises(ValueError):
        split_corpus(_convs(2))


def test_split_spec_ratios_must_sum_to_one():
    with pytest.raises(ValueError):
        SplitSpec((0.8, 0.1, 0.2))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 60), seed=st.integers(0, 1000),
       w=st.tuples(st.integers(0, 10), st.integers(0, 10), st.integers(1, 10)))
def test_split_is_a_partition(n, seed, w):
    ratios = tuple(x / sum(w) for x in w)
    ratios = (ratios[0], ratios[1], 1.0 - ratios[0] - ratios[1])
    corpus = _convs(n)
    parts = split_corpus(corpus, SplitSpec(ratios, seed))
    ids = [c.id for p in parts for c in p]
    assert sorted(ids) == sorted(c.id for c in corpus)
    for size, r in zip(map(len, parts), ratios):
        assert abs(size - r * n) < 1 + 1e-9
    assert parts == split_corpus(corpus, SplitSpec(ratios, seed))


def test_tokenizer_examples():
    # a and b both occur twice here: the tie goes to the lexicographically smaller word
    tok = fit_tokenizer([conv("c", "b a b", "a")], 10)
    assert tok.vocab == ["a", "b"]
    tok = fit_tokenizer([conv("c", "a b a", "c")], 10)
    assert tok.vocab == ["a", "b", "c"]
    tok = fit_tokenizer([conv("c", "hello world", "ok")], 20)
    assert tok.decode(tok.encode("hello world")) == "hello world"
    assert tok.encode("zzz") == [UNK]
    assert tok.decode(tok.encode("zzz")) == "<unk>"


def test_tokenizer_errors():
    with pytest.raises(ValueError):
        fit_tokenizer([], 100)
    with pytest.raises(ValueError):
        fit_tokenizer([conv("c", "a", "b")], 3)


def test_tokenizer_round_trip_and_save(tmp_path, toy_corpus, toy_tokenizer):
    text = toy_corpus[0].turns[0].text
    assert toy_tokenizer.decode(toy_tokenizer.encode("  " + text.upper() + " ")) == " ".join(text.lower().split())
    path = tmp_path / "tok.json"
    toy_tokenizer.save(path)
    from supportrefine.tokenizer import Tokenizer
    again = Tokenizer.load(path)
    assert again.fingerprint() == toy_tokenizer.fingerprint()
    assert set(json.loads(path.read_text())) == {"specials", "vocab"}


_text = st.lists(st.sampled_from(["a", "b", "ok", "yes", "why ?"]), min_size=1, max_size=5).map(" ".join)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(_text, min_size=1, max_size=4), min_size=1, max_size=5))
def test_serialize_parse_identity(convs):
    corpus = [Conversation(f"id{i}", tuple(Turn(SEEKER if k % 2 == 0 else SUPPORTER, t) for k, t in enumerate(ts)))
              for i, ts in enumerate(convs)]
    assert parse_corpus(serialize_corpus(corpus)) == corpus


def test_toy_corpus_deterministic():
    a = synthesize_toy_corpus(ToyCorpusConfig(n_conversations=200), seed=1)
    b = synthesize_toy_corpus(ToyCorpusConfig(n_conversations=200), seed=1)
    assert len(a) == 200 and corpus_digest(a) == corpus_digest(b)
    assert corpus_digest(a) != corpus_digest(synthesize_toy_corpus(ToyCorpusConfig(n_conversations=200), seed=2))
    assert all(build_instances([c]) for c in a)


def test_toy_corpus_config_errors():
    with pytest.raises(ValueError):
        synthesize_toy_corpus(ToyCorpusConfig(n_conversations=0))
    with pytest.raises(ValueError):
        synthesize_toy_corpus(ToyCorpusConfig(vocab_size=20))


def test_toy_corpus_vocabulary_fits():
    corpus = synthesize_toy_corpus(ToyCorpusConfig(n_conversations=200), seed=0)
    words = {w for c in corpus for t in c.turns for w in t.text.split()}
    assert len(words) + 7 <= 200


def test_every_context_has_helpful_and_unhelpful_continuations():
    judge = RuleOracleJudge()
    conts = enumerate_continuations()
    for inst in build_instances(synthesize_toy_corpus(ToyCorpusConfig(n_conversations=10), seed=0)):
        labels = {aggregate(judge.classify(f, inst.context_turns, r) for f in FACETS) for r in conts}
        assert labels == {0, 1}, inst.instance_id
