"""
Maximum-likelihood base model
=============================

A two-layer causal transformer learns to reply to the toy conversations.
"""
import numpy as np

from supportrefine.corpus import SplitSpec, build_instances, split_corpus
from supportrefine.decode import greedy
from supportrefine.model import ModelConfig, TinyTransformer
from supportrefine.synthetic import synthesize_toy_corpus
from supportrefine.tokenizer import fit_tokenizer
from supportrefine.training import encode_instances, mean_gold_nll, train_mle

train, valid, _ = split_corpus(synthesize_toy_corpus(seed=0), SplitSpec(seed=0))
tok = fit_tokenizer(train, 200)
cfg = ModelConfig(vocab_size=len(tok), seed=0)
print(cfg.parameter_count(), "parameters")

enc_train = encode_instances(tok, build_instances(train), cfg.max_sequence_len, 20)
valid_inst = build_instances(valid)
enc_valid = encode_instances(tok, valid_inst, cfg.max_sequence_len, 20)

model = TinyTransformer(cfg)
print("held-out NLL before:", round(mean_gold_nll(model, enc_valid), 3), " uniform:", round(np.log(len(tok)), 3))

ckpt = train_mle(model, enc_train, lr=3e-4, epochs=30, batch_size=16, seed=0,
                 tokenizer_fingerprint=tok.fingerprint())
print("epoch losses:", [round(x, 3) for x in ckpt.metadata["epoch_loss"][::5]])
print("held-out NLL after:", round(mean_gold_nll(model, enc_valid), 3))

for inst, e in list(zip(valid_inst, enc_valid))[:4]:
    print("seeker:  ", inst.context_turns[-1].text)
    print("model:   ", greedy(model, e.x_ids, 20, detok=tok.decode).text)
    print("gold:    ", inst.gold_response.text)
