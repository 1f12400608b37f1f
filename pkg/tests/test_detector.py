"""Detection-statistic unit tests against independent oracles."""

import math

import numpy as np
import pytest

from vlguard import (
    EPS_FLOOR,
    ClassProbabilities,
    ScoreVariant,
    SimilarityMatrix,
    average_similarity,
    calibrate_threshold,
    context_probabilities,
    decide,
    detection_score,
    one_hot,
    symmetric_kl,
)

from oracles import column_mean_fsum, random_simplex, score_direct, symmetric_kl_direct


def probs(values):
    return ClassProbabilities(np.asarray(values, dtype=np.float64))


# ---------------------------------------------------------------------------
# average_similarity
# ---------------------------------------------------------------------------

def test_average_similarity_simple():
    s = SimilarityMatrix(np.array([[1.0, 3.0], [3.0, 5.0]]))
    np.testing.assert_array_equal(average_similarity(s), [2.0, 4.0])


def test_average_similarity_single_frame_identity():
    s = SimilarityMatrix(np.array([[0.2, 0.7, 0.1]]))
    np.testing.assert_array_equal(average_similarity(s), [0.2, 0.7, 0.1])


def test_average_similarity_matches_compensated_oracle():
    rng = np.random.default_rng(42)
    m = rng.normal(scale=10.0, size=(32, 10))
    got = average_similarity(SimilarityMatrix(m))
    np.testing.assert_allclose(got, column_mean_fsum(m), rtol=0, atol=1e-12)


def test_average_similarity_rejects_nonfinite():
    with pytest.raises(ValueError):
        SimilarityMatrix(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        SimilarityMatrix(np.array([[1.0, np.inf]]))


# ---------------------------------------------------------------------------
# context_probabilities
# ---------------------------------------------------------------------------

def test_softmax_of_constant_vector_is_uniform():
    p = context_probabilities(np.full(7, 3.25))
    np.testing.assert_allclose(p.values, np.full(7, 1 / 7), atol=1e-15)


def test_softmax_closed_form():
    p = context_probabilities(np.array([0.0, math.log(3.0)]))
    np.testing.assert_allclose(p.values, [0.25, 0.75], atol=1e-15)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(7)
    for _ in range(50):
        s = rng.normal(scale=50.0, size=12)
        c = rng.normal(scale=100.0)
        a = context_probabilities(s).values
        b = context_probabilities(s + c).values
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_softmax_survives_huge_scores():
    p = context_probabilities(np.array([1e5, 1e5 - 3.0]))
    assert np.isfinite(p.values).all()
    np.testing.assert_allclose(p.values.sum(), 1.0)


# ---------------------------------------------------------------------------
# symmetric_kl
# ---------------------------------------------------------------------------

def test_symmetric_kl_identical_is_zero():
    p = probs([0.5, 0.5])
    assert symmetric_kl(p, p) == 0.0


def test_symmetric_kl_matches_direct_summation_oracle():
    p = probs([0.9, 0.1])
    q = probs([0.5, 0.5])
    expected = symmetric_kl_direct([0.9, 0.1], [0.5, 0.5])
    assert symmetric_kl(p, q) == pytest.approx(expected, abs=1e-9)


def test_symmetric_kl_symmetric_on_random_pairs():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        m = int(rng.integers(2, 20))
        p = probs(random_simplex(rng, m))
        q = probs(random_simplex(rng, m))
        assert symmetric_kl(p, q) == symmetric_kl(q, p)


def test_symmetric_kl_dimension_mismatch():
    with pytest.raises(ValueError):
        symmetric_kl(probs([0.5, 0.5]), probs([0.3, 0.3, 0.4]))


def test_symmetric_kl_finite_for_one_hot_inputs():
    p = one_hot(probs([0.99, 0.01]))
    q = one_hot(probs([0.01, 0.99]))
    v = symmetric_kl(p, q)
    assert np.isfinite(v)
    assert v > 20.0  # ~ln(1/EPS_FLOOR) for fully disagreeing one-hots


# ---------------------------------------------------------------------------
# one_hot
# ---------------------------------------------------------------------------

def test_one_hot_definition():
    p = one_hot(probs([0.2, 0.7, 0.1]))
    np.testing.assert_allclose(p.values, [EPS_FLOOR, 1 - 2 * EPS_FLOOR, EPS_FLOOR])


def test_one_hot_idempotent():
    p = one_hot(probs([0.2, 0.7, 0.1]))
    np.testing.assert_allclose(one_hot(p).values, p.values, atol=1e-12)


def test_one_hot_tie_goes_to_lowest_index():
    p = one_hot(probs([0.5, 0.5]))
    assert p.argmax() == 0


def test_one_hot_preserves_argmax():
    rng = np.random.default_rng(5)
    for _ in range(200):
        v = random_simplex(rng, int(rng.integers(2, 30)))
        assert one_hot(probs(v)).argmax() == int(np.argmax(v))


# ---------------------------------------------------------------------------
# detection_score
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("variant", [v for v in ScoreVariant if v is not ScoreVariant.VLAD2])
def test_identical_inputs_score_zero(variant):
    p = probs([0.25, 0.25, 0.3, 0.2])
    assert detection_score(p, p, variant).value == 0.0


def test_vlad2_zero_only_against_matching_smoothed_one_hot():
    p = probs([0.2, 0.7, 0.1])
    assert detection_score(p, p, ScoreVariant.VLAD2).value > 0.0
    assert detection_score(p, one_hot(p), ScoreVariant.VLAD2).value == 0.0


def test_a4_worked_example():
    got = detection_score(probs([0.6, 0.4]), probs([0.3, 0.7]), ScoreVariant.A4)
    assert got.value == pytest.approx(0.6, abs=1e-15)


def test_a1_worked_example_matches_oracle():
    expected = score_direct([0.6, 0.4], [0.3, 0.7], "A1")
    got = detection_score(probs([0.6, 0.4]), probs([0.3, 0.7]), ScoreVariant.A1)
    assert got.value == pytest.approx(expected, abs=1e-12)


def test_all_variants_match_extended_precision_oracle():
    rng = np.random.default_rng(99)
    for _ in range(200):
        m = int(rng.integers(2, 40))
        pa = random_simplex(rng, m, peaked=True)
        pc = random_simplex(rng, m)
        for variant in ScoreVariant:
            got = detection_score(probs(pa), probs(pc), variant).value
            want = score_direct(pa, pc, variant.value)
            assert got == pytest.approx(want, abs=1e-9), variant


def test_scores_nonnegative_and_symmetric_where_applicable():
    rng = np.random.default_rng(4)
    for _ in range(300):
        m = int(rng.integers(2, 25))
        pa, pc = probs(random_simplex(rng, m)), probs(random_simplex(rng, m))
        for variant in ScoreVariant:
            assert detection_score(pa, pc, variant).value >= 0.0
        for variant in (ScoreVariant.A3, ScoreVariant.A4):
            assert (detection_score(pa, pc, variant).value
                    == detection_score(pc, pa, variant).value)


def test_unknown_variant_rejected():
    p = probs([0.5, 0.5])
    with pytest.raises(ValueError):
        detection_score(p, p, "B7")


def test_variant_accepts_plain_string():
    p = probs([0.6, 0.4])
    q = probs([0.3, 0.7])
    assert detection_score(p, q, "A4").value == pytest.approx(0.6)


# ---------------------------------------------------------------------------
# calibrate_threshold / decide
# ---------------------------------------------------------------------------

def test_percentile_indexing_convention():
    tm = calibrate_threshold(list(range(1, 11)), theta=90)
    assert tm.h == 9.0
    assert tm.k == 10


def test_single_score_clamps():
    for theta in (0.5, 50, 100):
        assert calibrate_threshold([5.0], theta).h == 5.0


def test_percentile_on_uniform_sample_lands_near_quantile():
    rng = np.random.default_rng(2024)
    scores = rng.uniform(0, 1, size=1000)
    tm = calibrate_threshold(scores, theta=95)
    assert 0.93 <= tm.h <= 0.97
    # cross-check against the order statistic directly
    assert tm.h == float(np.sort(scores)[int(np.floor(1000 * 95 / 100)) - 1])


def test_threshold_monotone_in_theta():
    rng = np.random.default_rng(11)
    scores = rng.exponential(size=137)
    hs = [calibrate_threshold(scores, th).h for th in (5, 25, 50, 75, 90, 99, 100)]
    assert all(a <= b for a, b in zip(hs, hs[1:]))


def test_calibrate_rejects_bad_inputs():
    with pytest.raises(ValueError):
        calibrate_threshold([], 90)
    with pytest.raises(ValueError):
        calibrate_threshold([1.0], 0.0)
    with pytest.raises(ValueError):
        calibrate_threshold([1.0], 101.0)
    with pytest.raises(ValueError):
        calibrate_threshold([np.nan], 50)


def test_digest_tracks_sorted_scores():
    a = calibrate_threshold([3.0, 1.0, 2.0], 50)
    b = calibrate_threshold([1.0, 2.0, 3.0], 50)
    c = calibrate_threshold([1.0, 2.0, 4.0], 50)
    assert a.created_from == b.created_from
    assert a.created_from != c.created_from


def test_decision_rule_is_strict():
    from vlguard import DetectionScore

    s = DetectionScore(0.4, ScoreVariant.VLAD1)
    assert decide(s, 0.3).adversarial
    assert not decide(DetectionScore(0.3, ScoreVariant.VLAD1), 0.3).adversarial
    assert not decide(DetectionScore(0.0, ScoreVariant.VLAD1), 0.1).adversarial


def test_decide_is_pure():
    from vlguard import DetectionScore

    s = DetectionScore(0.7, ScoreVariant.A2)
    first = decide(s, 0.5)
    for _ in range(5):
        nxt = decide(s, 0.5)
        assert nxt == first


# ---------------------------------------------------------------------------
# type invariants
# ---------------------------------------------------------------------------

def test_class_probabilities_validation():
    with pytest.raises(ValueError):
        ClassProbabilities(np.array([0.5]))             # M < 2
    with pytest.raises(ValueError):
        ClassProbabilities(np.array([0.7, 0.7]))        # sum != 1
    with pytest.raises(ValueError):
        ClassProbabilities(np.array([-0.1, 1.1]))       # negative entry
    with pytest.raises(ValueError):
        ClassProbabilities(np.array([np.nan, 1.0]))     # non-finite


def test_detection_score_validation():
    from vlguard import DetectionScore

    with pytest.raises(ValueError):
        DetectionScore(-0.1, ScoreVariant.A1)
    with pytest.raises(ValueError):
        DetectionScore(float("inf"), ScoreVariant.VLAD1)
