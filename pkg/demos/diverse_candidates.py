"""
Diverse beam search
===================

Ten groups of width one, each penalized for reusing tokens that earlier
groups picked at the same step.
"""
import warnings

from supportrefine.corpus import SplitSpec, build_instances, split_corpus
from supportrefine.decode import DecodeConfig, beam_search, diverse_beam_search
from supportrefine.model import ModelConfig, TinyTransformer
from supportrefine.synthetic import synthesize_toy_corpus
from supportrefine.tokenizer import fit_tokenizer
from supportrefine.training import encode_instances, train_mle

train, _, _ = split_corpus(synthesize_toy_corpus(seed=1), SplitSpec(seed=1))
tok = fit_tokenizer(train, 200)
cfg = ModelConfig(vocab_size=len(tok), seed=1)
instances = build_instances(train)
enc = encode_instances(tok, instances, cfg.max_sequence_len, 20)
model = TinyTransformer(cfg)
train_mle(model, enc, lr=3e-4, epochs=15, batch_size=16, seed=1)

x = enc[0].x_ids
print("context:", " | ".join(t.text for t in instances[0].context_turns))
for strength in (0.0, 0.5, 2.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cands = diverse_beam_search(model, x, DecodeConfig(diversity_strength=strength), detok=tok.decode)
    print(f"\nstrength {strength}: {len({c.text for c in cands})} distinct")
    for c in cands[:5]:
        print(f"  group {c.group_index}  {c.model_score:7.3f}  {c.text}")

# one group with no penalty is ordinary beam search
plain = beam_search(model, x, 3, 20)
one = diverse_beam_search(model, x, DecodeConfig(K=1, group_count=1, beam_width_per_group=3,
                                                 diversity_strength=0.0))[0]
print("\nbeam == one-group diverse beam:", plain.token_ids == one.token_ids)
