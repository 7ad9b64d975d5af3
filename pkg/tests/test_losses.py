import itertools

import numpy as np
import pytest
import torch
from hypothesis import assume, given, settings, strategies as st

from supportrefine.losses import (Hyperparams, contrastive_loss, length_normalized_logprob, nll_loss,
                                  total_loss)


def pair_oracle(P, labels, lam):
    """Ordered-pair enumeration of the hinge sum, divided by 2K."""
    K = len(P)
    s = sum(max(0.0, -(labels[i] - labels[j]) * (P[i] - P[j] + lam))
            for i in range(K) for j in range(K) if i != j)
    return s / (2 * K)


def cl(P, labels, lam=0.01):
    return float(contrastive_loss(list(P), list(labels), lam))


def test_defaults():
    hp = Hyperparams()
    assert (hp.lambda_margin, hp.alpha_length_penalty, hp.beta_cl, hp.beta_gen) == (0.01, 1.0, 1.0, 1.0)
    assert (hp.K, hp.learning_rate, hp.epochs) == (10, 3e-5, 1)


def test_hand_enumerated_example():
    assert abs(cl([-0.5, -0.3], [1, 0]) - 0.10) <= 1e-12
    assert abs(pair_oracle([-0.5, -0.3], [1, 0], 0.01) - 0.10) <= 1e-12


def test_equal_labels_give_exact_zero():
    rng = np.random.default_rng(0)
    for lab in (0, 1):
        assert cl(rng.normal(size=6), [lab] * 6) == 0.0


def test_margin_satisfied_gives_exact_zero():
    assert cl([-0.1, -0.5], [1, 0]) == 0.0


def test_errors():
    with pytest.raises(ValueError):
        contrastive_loss([0.1], [1])
    with pytest.raises(ValueError):
        contrastive_loss([0.1, 0.2, 0.3], [1, 0])
    with pytest.raises(ValueError):
        length_normalized_logprob([], 1.0)
    with pytest.raises(ValueError):
        nll_loss([])
    with pytest.raises(ValueError):
        total_loss(float("nan"), 1.0)


def test_pair_count_normalizer():
    P, lab = [-0.5, -0.3, -0.2, -0.9], [1, 0, 1, 0]
    a = float(contrastive_loss(P, lab, 0.01, "2K"))
    b = float(contrastive_loss(P, lab, 0.01, "pair_count"))
    assert a > 0
    assert abs(b - a * 8 / 12) <= 1e-12


def test_length_normalization_examples():
    lp = [-1.0] * 4
    assert float(length_normalized_logprob(lp, 1)) == -1.0
    assert float(length_normalized_logprob(lp, 0)) == -4.0
    assert float(length_normalized_logprob(lp, 2)) == -0.25


def test_nll_examples():
    assert float(nll_loss([-1.0, -2.0, -3.0])) == 2.0
    assert float(nll_loss([0.0, 0.0])) == 0.0
    assert abs(float(nll_loss([-0.693])) - 0.693) <= 1e-15


def test_total_loss_examples():
    assert abs(total_loss(0.10, 2.0, 1, 1) - 2.10) <= 1e-12
    assert total_loss(5.0, 2.0, 0.0, 1.0) == 2.0
    assert total_loss(cl([-3.0, 1.0], [1, 1]), 7.0, 1.0, 0.0) == 0.0


reals = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
sets = st.integers(2, 8).flatmap(lambda k: st.tuples(st.lists(reals, min_size=k, max_size=k),
                                                     st.lists(st.integers(0, 1), min_size=k, max_size=k)))


@settings(max_examples=300, deadline=None)
@given(sets, st.floats(0, 0.5))
def test_matches_pair_oracle_and_nonnegative(s, lam):
    P, lab = s
    v = cl(P, lab, lam)
    assert v >= 0
    assert abs(v - pair_oracle(P, lab, lam)) <= 1e-9


@settings(max_examples=300, deadline=None)
@given(sets, st.sampled_from([-3.0, -0.5, 0.25, 2.0]))
def test_translation_invariance(s, c):
    P, lab = s
    # dyadic shifts of dyadic values keep every difference exact in floating point
    P = [round(p * 64) / 64 for p in P]
    assert cl(P, lab) == cl([p + c for p in P], lab)


@settings(max_examples=300, deadline=None)
@given(sets, st.randoms(use_true_random=False))
def test_permutation_invariance(s, rnd):
    P, lab = s
    P = [round(p * 64) / 64 for p in P]
    idx = list(range(len(P)))
    rnd.shuffle(idx)
    # the loss is a sum of the same terms in another order; compare to rounding
    assert abs(cl(P, lab) - cl([P[i] for i in idx], [lab[i] for i in idx])) <= 1e-12


def test_monotonicity_at_random_points():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 1000:
        K = int(rng.integers(2, 9))
        P = rng.normal(size=K)
        lab = rng.integers(0, 2, size=K)
        if lab.min() == lab.max():
            continue
        k = int(rng.integers(K))
        delta = 1e-3
        bumped = P.copy()
        bumped[k] += delta
        kinks = [P[i] - P[j] + 0.01 for i in range(K) for j in range(K) if i != j]
        if min(abs(x) for x in kinks) < 2 * delta:
            continue
        before, after = cl(P, lab), cl(bumped, lab)
        if lab[k] == 1:
            assert after <= before
        else:
            assert after >= before
        checked += 1


@settings(max_examples=300, deadline=None)
@given(sets)
def test_zero_iff_every_helpful_clears_every_unhelpful_by_margin(s):
    P, lab = s
    lam = 0.01
    cleared = all(P[i] >= P[j] + lam for i in range(len(P)) for j in range(len(P)) if lab[i] == 1 and lab[j] == 0)
    assert (cl(P, lab, lam) == 0.0) == cleared


def test_boundary_case_is_zero_and_just_inside_is_positive():
    lam = 0.25
    assert cl([0.75, 0.5], [1, 0], lam) == 0.0  # P_h - P_u == lambda exactly
    assert cl([0.75 - 2 ** -20, 0.5], [1, 0], lam) > 0.0


def test_same_label_pairs_contribute_nothing():
    P = [-0.2, -0.9, -0.4, -0.1]
    with_extra = cl(P + [-5.0], [1, 0, 1, 0, 0])
    # the extra unhelpful candidate is far below every helpful one; only its K changes the scale
    assert abs(with_extra * 10 - cl(P, [1, 0, 1, 0]) * 8) <= 1e-12


def test_alpha_one_is_mean():
    rng = np.random.default_rng(1)
    for _ in range(50):
        lp = -rng.exponential(size=int(rng.integers(1, 12)))
        assert abs(float(length_normalized_logprob(lp, 1.0)) - lp.mean()) <= 1e-12


def test_subgradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    done = 0
    while done < 200:
        K = int(rng.integers(2, 9))
        P = rng.normal(size=K)
        lab = rng.integers(0, 2, size=K).tolist()
        kinks = [P[i] - P[j] + 0.01 for i in range(K) for j in range(K) if i != j and lab[i] != lab[j]]
        if kinks and min(abs(x) for x in kinks) < 1e-3:
            continue
        t = torch.tensor(P, requires_grad=True)
        contrastive_loss(t, lab).backward()
        h = 1e-7
        num = np.array([(cl(P + h * e, lab) - cl(P - h * e, lab)) / (2 * h) for e in np.eye(K)])
        g = t.grad.numpy()
        scale = np.maximum(np.maximum(np.abs(g), np.abs(num)), 1e-6)
        assert np.max(np.abs(g - num) / scale) < 1e-6 or np.max(np.abs(g - num)) < 1e-9
        done += 1


def test_kink_subgradient_is_zero():
    # P_h - P_u == lambda exactly: the (unhelpful, helpful) hinge sits on its kink
    t = torch.tensor([0.75, 0.5], dtype=torch.float64, requires_grad=True)
    contrastive_loss(t, [1, 0], 0.25).backward()
    assert t.grad.tolist() == [0.0, 0.0]
