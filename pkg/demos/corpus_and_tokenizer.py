"""
Synthetic support conversations
===============================

The toy grammar plays the part of a support-conversation corpus. Seekers
describe a feeling about a topic, sometimes asking for advice, and
supporters answer with one of several strategies.
"""
from supportrefine.corpus import SplitSpec, build_instances, serialize_corpus, split_corpus
from supportrefine.synthetic import ToyCorpusConfig, synthesize_toy_corpus
from supportrefine.tokenizer import fit_tokenizer

corpus = synthesize_toy_corpus(ToyCorpusConfig(n_conversations=200), seed=0)
print(len(corpus), "conversations")
for turn in corpus[0].turns:
    print(f"  {turn.role:9s} [{turn.strategy or '-'}] {turn.text}")

# every supporter turn after the first turn becomes a training instance
train, valid, test = split_corpus(corpus, SplitSpec((0.8, 0.1, 0.1), seed=0))
instances = build_instances(train)
print(len(train), len(valid), len(test), "conversations;", len(instances), "training instances")

tok = fit_tokenizer(train, max_vocab=200)
print("vocabulary:", len(tok), "tokens, first few:", tok.vocab[:12])

ids = tok.encode_context(instances[0].context_turns)
print(ids)
print(tok.decode(ids))

# the corpus file format is plain JSON lines
print(serialize_corpus(corpus[:1]).decode())
