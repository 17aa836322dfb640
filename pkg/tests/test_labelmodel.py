import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codeintent.labeling import LabelMatrix
from codeintent.labelmodel import (
    DegenerateModelError,
    LabelModelParams,
    assign_labels,
    fit_em,
    log_likelihood,
    majority_vote,
    posterior,
    posteriors,
    sample_synthetic,
)


def two_lf_params():
    em = np.array([
        [[0, 0.8, 0.2], [0, 0.2, 0.8]],
        [[0, 0.6, 0.4], [0, 0.4, 0.6]],
    ])
    return LabelModelParams(0.5, em)


def symmetric_params(accuracies, abstain, pi):
    em = [[[b, (1 - b) * a, (1 - b) * (1 - a)], [b, (1 - b) * (1 - a), (1 - b) * a]]
          for a, b in zip(accuracies, abstain)]
    return LabelModelParams(pi, np.array(em))


def brute_force_posterior(params, row):
    """Enumerate both classes by hand with plain Python floats."""
    scores = []
    for y in (0, 1):
        s = params.pi if y == 1 else 1 - params.pi
        for j, v in enumerate(row):
            s *= float(params.emissions[j][y][v + 1])
        scores.append(s)
    z = scores[0] + scores[1]
    return scores[0] / z, scores[1] / z


def brute_force_vote(row, coin):
    ones = sum(1 for v in row if v == 1)
    zeros = sum(1 for v in row if v == 0)
    if ones > zeros:
        return 1
    if zeros > ones:
        return 0
    return coin


@st.composite
def params_strategy(draw, n_max=3):
    n = draw(st.integers(1, n_max))
    em = []
    for _ in range(n):
        per_class = []
        for _ in range(2):
            w = [draw(st.floats(0.01, 1.0)) for _ in range(3)]
            per_class.append([x / sum(w) for x in w])
        em.append(per_class)
    return LabelModelParams(draw(st.floats(0.01, 0.99)), np.array(em))


# -- posterior ---------------------------------------------------------------

def test_posterior_hand_examples():
    p = two_lf_params()
    assert posterior(p, [1, 1])[1] == pytest.approx(6 / 7, abs=1e-12)
    assert posterior(p, [1, 0])[1] == pytest.approx(0.16 / 0.22, abs=1e-12)
    assert posterior(p, [1, 0])[1] == pytest.approx(0.32 / 0.44, abs=1e-12)


def test_all_abstain_returns_prior():
    em = np.array([[[0.5, 0.3, 0.2], [0.5, 0.1, 0.4]]] * 3)
    p = LabelModelParams(0.3, em)
    assert posterior(p, [-1, -1, -1]) == pytest.approx((0.7, 0.3), abs=1e-12)


def test_degenerate_posterior_raises():
    em = np.array([[[0, 1, 0], [0, 0, 1]], [[0, 0, 1], [0, 1, 0]]])
    with pytest.raises(DegenerateModelError):
        posterior(LabelModelParams(0.5, em), [0, 0])


@given(params_strategy(), st.data())
def test_posterior_matches_enumeration(params, data):
    for row in itertools.product((-1, 0, 1), repeat=params.n_lfs):
        p0, p1 = posterior(params, row)
        b0, b1 = brute_force_posterior(params, row)
        assert abs(p0 - b0) < 1e-12 and abs(p1 - b1) < 1e-12
        assert abs(p0 + p1 - 1) < 1e-9 and 0 <= p0 <= 1


@given(params_strategy(n_max=5), st.lists(st.integers(-1, 1), min_size=5, max_size=5))
def test_label_swap_symmetry(params, row):
    row = row[:params.n_lfs]
    flipped = [v if v == -1 else 1 - v for v in row]
    # relabel outputs 0<->1 in the emissions as well as the classes
    em = params.emissions[:, ::-1, :][:, :, [0, 2, 1]]
    swapped = LabelModelParams(1 - params.pi, em)
    p0, p1 = posterior(params, row)
    q0, q1 = posterior(swapped, flipped)
    assert q0 == pytest.approx(p1, abs=1e-12) and q1 == pytest.approx(p0, abs=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        LabelModelParams(0.5, np.array([[[0.5, 0.5, 0.5], [0, 0, 1]]]))
    with pytest.raises(ValueError):
        LabelModelParams(1.0, np.array([[[0, 0, 1], [0, 0, 1]]]))


def test_params_round_trip(tmp_path):
    p = two_lf_params()
    p.save(tmp_path / "p.json", ["a", "b"])
    back = LabelModelParams.load(tmp_path / "p.json")
    assert back.pi == p.pi and np.array_equal(back.emissions, p.emissions)


# -- log-likelihood ----------------------------------------------------------

def test_log_likelihood_hand_example():
    p = two_lf_params()
    assert log_likelihood(p, np.array([[1, 1]])) == pytest.approx(math.log(0.28), abs=1e-12)
    assert log_likelihood(p, np.array([[1, 1], [1, 1]])) == pytest.approx(2 * math.log(0.28), abs=1e-12)


# -- majority vote -----------------------------------------------------------

def test_majority_vote_examples():
    L = np.array([[1, -1, 1, 0, -1, 1, -1, -1], [0, 0, -1, -1, -1, -1, -1, 1]])
    assert majority_vote(L, 0).tolist() == [1, 0]


def test_majority_vote_tie_is_seeded():
    L = -np.ones((50, 8), dtype=int)
    a, b = majority_vote(L, 11), majority_vote(L, 11)
    assert np.array_equal(a, b) and set(a.tolist()) <= {0, 1}
    assert 0 < a.sum() < 50


@given(st.lists(st.lists(st.integers(-1, 1), min_size=8, max_size=8), min_size=1, max_size=40),
       st.integers(0, 2**31))
def test_majority_vote_matches_naive_counter(rows, seed):
    votes = majority_vote(np.array(rows), seed)
    coins = np.random.default_rng(seed).integers(0, 2, size=len(rows))
    assert votes.tolist() == [brute_force_vote(r, int(c)) for r, c in zip(rows, coins)]


# -- assign_labels -----------------------------------------------------------

def test_assign_labels():
    probs = np.array([[0.3, 0.7], [0.5, 0.5], [0.9, 0.1]])
    assert assign_labels(probs, "hard").tolist() == [1, 1, 0]
    assert assign_labels(probs, "soft").tolist() == [0.7, 0.5, 0.1]
    with pytest.raises(ValueError):
        assign_labels(probs, "fuzzy")


# -- sampler -----------------------------------------------------------------

def test_sampler_deterministic_emissions():
    em = np.array([[[0, 1, 0], [0, 0, 1]]] * 4)
    L, y = sample_synthetic(LabelModelParams(0.4, em), 200, 3)
    assert np.array_equal(L.values, np.repeat(y[:, None], 4, axis=1))


def test_sampler_abstain_rate():
    p = symmetric_params([0.8] * 5, [0.3] * 5, 0.5)
    L, _ = sample_synthetic(p, 20000, 5)
    assert abs((L.values == -1).mean() - 0.3) < 0.02


def test_sampler_seeded():
    p = symmetric_params([0.8] * 3, [0.3] * 3, 0.5)
    a, ya = sample_synthetic(p, 100, 9)
    b, yb = sample_synthetic(p, 100, 9)
    assert np.array_equal(a.values, b.values) and np.array_equal(ya, yb)


# -- EM ----------------------------------------------------------------------

def test_fit_recovers_parameters():
    true = symmetric_params([0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.95],
                            [0.3, 0.5, 0.4, 0.6, 0.2, 0.5, 0.3, 0.7], 0.6)
    L, _ = sample_synthetic(true, 20000, 1)
    fit = fit_em(L)
    assert np.abs(fit.emissions - true.emissions).max() < 0.03
    assert abs(fit.pi - true.pi) < 0.02


def test_planted_perfect_lf_ranks_first():
    true = symmetric_params([0.6, 0.65, 0.7, 0.75, 0.6], [0.4] * 5, 0.5)
    L, y = sample_synthetic(true, 5000, 2)
    values = np.column_stack([L.values, y])
    fit = fit_em(values)
    diag = fit.emissions[:, 0, 1] * (1 - fit.pi) + fit.emissions[:, 1, 2] * fit.pi
    assert diag.argmax() == values.shape[1] - 1


def test_all_abstain_matrix_rejected():
    with pytest.raises(DegenerateModelError):
        fit_em(-np.ones((5, 3), dtype=int))


def test_fit_handles_one_sided_lfs():
    # each LF only ever votes one class, like the default heuristics
    rng = np.random.default_rng(0)
    y = rng.random(4000) < 0.5
    rates = [(0.4, 0.05, 1), (0.35, 0.1, 1), (0.05, 0.4, 0), (0.1, 0.3, 0)]
    cols = [np.where(rng.random(4000) < np.where(y, r1, r0), emit, -1) for r1, r0, emit in rates]
    L = np.column_stack(cols)
    fit = fit_em(L, emit_labels=[1, 1, 0, 0])
    acc = (assign_labels(posteriors(fit, L), "hard") == y).mean()
    assert acc > 0.6
    assert fit.emissions[0, 1, 2] > fit.emissions[0, 0, 2]


def test_anchoring_swaps_flipped_solution():
    true = symmetric_params([0.9, 0.85, 0.8, 0.75], [0.3] * 4, 0.5)
    L, y = sample_synthetic(true, 3000, 4)
    fit = fit_em(L.values, emit_labels=[1, 1, 1, 1])
    assert (assign_labels(posteriors(fit, L), "hard") == y).mean() > 0.8


def test_fit_is_bit_reproducible():
    true = symmetric_params([0.8, 0.7, 0.9], [0.4] * 3, 0.5)
    L, _ = sample_synthetic(true, 2000, 6)
    a, b = fit_em(L), fit_em(L)
    assert np.array_equal(a.emissions, b.emissions) and a.pi == b.pi


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_em_objective_monotone(seed):
    rng = np.random.default_rng(seed)
    L = rng.integers(-1, 2, size=(int(rng.integers(5, 200)), int(rng.integers(1, 9))))
    L[0, 0] = 1
    fit = fit_em(L, tol=0.0, max_iter=60)
    assert np.diff(fit.history).min() >= -1e-9
    plain = fit_em(L, tol=0.0, max_iter=60, smoothing=0.0)
    assert np.diff(plain.history).min() >= -1e-9


def test_fitted_params_are_valid():
    true = symmetric_params([0.8, 0.7, 0.9], [0.4] * 3, 0.3)
    L, _ = sample_synthetic(true, 500, 8)
    fit = fit_em(L)
    fit.validate()
    probs = posteriors(fit, L)
    assert np.allclose(probs.sum(axis=1), 1, atol=1e-9)
