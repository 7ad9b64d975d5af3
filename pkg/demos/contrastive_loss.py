"""
The contrastive ranking loss
============================

Helpful candidates should score above unhelpful ones by a margin. Scores
are length-normalized sequence log-probabilities.
"""
import numpy as np
import torch

from supportrefine.losses import contrastive_loss, length_normalized_logprob, total_loss

print(contrastive_loss([-0.5, -0.3], [1, 0], 0.01).item())  # helpful one ranked lower: 0.10
print(contrastive_loss([-0.3, -0.5], [1, 0], 0.01).item())  # ranked higher by more than the margin: 0

# the loss only sees pairwise gaps, so shifting every score changes nothing
P = np.array([-1.25, -0.5, -2.0, -0.75])
labels = [1, 0, 1, 0]
print(contrastive_loss(P, labels).item(), contrastive_loss(P + 3.0, labels).item())

# sweeping one helpful score across the margin
gap = np.linspace(-0.05, 0.05, 11)
for g in gap:
    print(f"  P_h - P_u = {g:+.2f}  loss {contrastive_loss([g, 0.0], [1, 0]).item():.4f}")

# length normalization keeps long replies from being punished for their length
short, long_ = torch.tensor([-1.0, -1.0]), torch.tensor([-1.0] * 8)
print(length_normalized_logprob(short).item(), length_normalized_logprob(long_).item())

P = torch.tensor([-0.9, -0.4], requires_grad=True)
loss = total_loss(contrastive_loss(P, [1, 0]), torch.tensor(1.7))
loss.backward()
print("loss", loss.item(), "gradient on scores", P.grad.tolist())
