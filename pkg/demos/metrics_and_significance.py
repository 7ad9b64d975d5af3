"""
Reference-overlap metrics
=========================
"""
from supportrefine.metrics import bleu_n, cider, meteor_lite, paired_bootstrap, rouge_l, sentence_bleu_2

refs = ["it sounds like you feel sad about your job",
        "can you tell me more about the exam",
        "maybe you could try talking to a friend"]
hyps = ["you feel sad about your job",
        "tell me more about the exam",
        "have you tried cooking"]

# B-n is a geometric mean over orders 1..n, so it need not fall as n grows
for n in range(1, 5):
    print(f"B-{n}", round(bleu_n(hyps, refs, n), 2))
print("R-L", round(rouge_l(hyps, refs), 2))
print("METEOR-lite", round(meteor_lite(hyps, refs), 2))
print("CIDEr", round(cider(hyps, refs), 3))

# clipped counts: repeating a matching word earns credit only once per reference occurrence
print(bleu_n(["the the the"], ["the cat on the mat"], 1))

# paired bootstrap on per-sentence scores
better = ["it sounds like you feel sad about your job", "can you tell me more about it", "maybe talk to a friend"]
a = [sentence_bleu_2(h, r) for h, r in zip(better, refs)]
b = [sentence_bleu_2(h, r) for h, r in zip(hyps, refs)]
print("p =", paired_bootstrap(a, b, resamples=2000, seed=0))
