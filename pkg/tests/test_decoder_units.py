import math

import numpy as np
import pytest

from guidedec.decoder import (
    boost_guide_token,
    fuse_scores,
    headroom,
    kth_largest,
    lambda_at_step,
    ranked_ids,
    relative_position,
    top_k_distribution,
    top_k_sample,
)


class TestFuseScores:
    def test_elementwise_sum(self):
        fused = fuse_scores(np.array([0.1, -1.0, 2.0]), np.array([1.0, 0.5, -0.5]))
        np.testing.assert_allclose(fused, [1.1, -0.5, 1.5], atol=1e-12)

    def test_zero_vector_is_identity(self):
        ar = np.array([-1.2, 0.4, 3.3])
        np.testing.assert_array_equal(fuse_scores(ar, np.zeros(3)), ar)

    def test_masked_model_can_flip_the_argmax(self):
        fused = fuse_scores(np.array([3.0, 1.0]), np.array([0.0, 4.0]))
        np.testing.assert_array_equal(fused, [3.0, 5.0])
        assert int(np.argmax(fused)) == 1

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            fuse_scores(np.zeros(3), np.zeros(4))

    def test_shift_equivariance(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            ar = rng.normal(size=8)
            mlm = rng.normal(size=8)
            c = rng.normal()
            np.testing.assert_allclose(
                fuse_scores(ar + c, mlm), fuse_scores(ar, mlm) + c, atol=1e-12
            )
            base_set, _ = top_k_distribution(fuse_scores(ar, mlm), 3)
            shifted_set, _ = top_k_distribution(fuse_scores(ar + c, mlm), 3)
            np.testing.assert_array_equal(base_set, shifted_set)


class TestLambdaSchedule:
    def test_linear_growth(self):
        assert lambda_at_step(0.3, 7, 2) == pytest.approx(1.5)

    def test_zero_shift(self):
        assert lambda_at_step(0.0, 13, 4) == 0.0

    def test_first_step_after_reset(self):
        assert lambda_at_step(0.5, 1, 0) == pytest.approx(0.5)

    def test_step_before_insertion_rejected(self):
        with pytest.raises(ValueError, match="step before last insertion"):
            lambda_at_step(0.3, 2, 2)

    def test_strictly_increasing_and_resets(self):
        values = [lambda_at_step(0.2, i, 3) for i in range(4, 10)]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert lambda_at_step(0.2, 9, 8) < lambda_at_step(0.2, 9, 3)


class TestRelativePosition:
    def test_midpoint(self):
        assert relative_position(5.0, 0.0, 10.0) == pytest.approx(0.5)

    def test_maximal_token(self):
        assert relative_position(10.0, 0.0, 10.0) == 1.0

    def test_degenerate_flat_vector(self):
        assert relative_position(3.0, 3.0, 3.0) == 1.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            relative_position(11.0, 0.0, 10.0)


class TestHeadroom:
    def test_gap(self):
        assert headroom(10.0, 6.0) == pytest.approx(4.0)

    def test_flat_top(self):
        assert headroom(10.0, 10.0) == 0.0

    def test_negative_log_scores(self):
        assert headroom(-1.2, -3.7) == pytest.approx(2.5)

    def test_kth_above_max_rejected(self):
        with pytest.raises(ValueError):
            headroom(5.0, 6.0)


class TestBoostGuideToken:
    def test_composite_arithmetic(self):
        # s_min = 0, s_max = 10, s_K(3) = 6, s_w1 = 5, lambda = 2 -> 10.0
        scores = np.array([10.0, 6.0, 8.0, 5.0, 0.0])
        out = boost_guide_token(scores, first_token_id=3, k=3, lambda_i=2.0)
        assert out[3] == pytest.approx(10.0, abs=1e-9)
        np.testing.assert_array_equal(np.delete(out, 3), np.delete(scores, 3))

    def test_zero_lambda_enters_at_boundary(self):
        scores = np.array([10.0, 6.0, 8.0, 5.0, 0.0])
        out = boost_guide_token(scores, first_token_id=3, k=3, lambda_i=0.0)
        assert out[3] == pytest.approx(6.0)

    def test_six_token_example(self):
        scores = np.array([9.0, 7.0, 5.0, 3.0, 1.0, 0.0])
        out = boost_guide_token(scores, first_token_id=4, k=3, lambda_i=1.0)
        assert out[4] == pytest.approx(5.0 + 4.0 / 9.0, abs=1e-9)
        assert list(ranked_ids(out)).index(4) == 2  # rank 3

    def test_invalid_token_rejected(self):
        with pytest.raises(ValueError, match="unknown token id"):
            boost_guide_token(np.zeros(3), 3, 2, 1.0)

    def test_monotone_in_lambda(self):
        scores = np.array([9.0, 7.0, 5.0, 3.0, 1.0, 0.0])
        values = [
            boost_guide_token(scores, 4, 3, lam)[4] for lam in (0.0, 0.5, 1.0, 2.0, 5.0)
        ]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_admission_property_randomized(self):
        rng = np.random.default_rng(20240817)
        for _ in range(2000):
            size = int(rng.integers(2, 65))
            k = int(rng.integers(1, 11))
            scores = rng.normal(scale=3.0, size=size)
            w1 = int(rng.integers(size))
            lam = float(rng.uniform(0.01, 3.0))
            out = boost_guide_token(scores, w1, k, lam)
            s_k = kth_largest(scores, k)
            alpha = (scores[w1] - scores.min()) / (scores.max() - scores.min())
            if lam * alpha * (scores.max() - s_k) <= 0:
                continue
            assert out[w1] >= s_k
            candidates, _ = top_k_distribution(out, k)
            assert w1 in candidates


class TestTopKSampling:
    def test_closed_form_probabilities(self):
        candidates, probs = top_k_distribution(np.array([3.0, 1.0, 2.0, 0.0]), k=2)
        np.testing.assert_array_equal(candidates, [0, 2])
        e = math.e
        np.testing.assert_allclose(probs, [e / (e + 1), 1 / (e + 1)], atol=1e-12)

    def test_k_clamped_to_vocabulary(self):
        candidates, probs = top_k_distribution(np.array([0.0, 1.0, 2.0]), k=10)
        assert len(candidates) == 3
        assert probs.sum() == pytest.approx(1.0)

    def test_ties_break_by_ascending_id(self):
        candidates, probs = top_k_distribution(np.array([2.0, 2.0, 2.0]), k=2)
        np.testing.assert_array_equal(candidates, [0, 1])
        np.testing.assert_allclose(probs, [0.5, 0.5])

    def test_degenerate_distribution_rejected(self):
        with pytest.raises(ValueError, match="degenerate distribution"):
            top_k_distribution(np.array([-np.inf, -np.inf]), k=2)

    def test_temperature_flattens(self):
        _, cold = top_k_distribution(np.array([3.0, 1.0]), k=2, temperature=0.5)
        _, hot = top_k_distribution(np.array([3.0, 1.0]), k=2, temperature=4.0)
        assert cold[0] > hot[0]

    def test_consumes_exactly_one_draw(self):
        class CountingRNG:
            calls = 0

            def random(self):
                self.calls += 1
                return 0.42

        rng = CountingRNG()
        chosen = top_k_sample(np.array([3.0, 1.0, 2.0, 0.0]), 2, 1.0, rng)
        assert rng.calls == 1
        assert chosen == 0  # 0.42 < e/(e+1)

    def test_empirical_frequencies_match(self):
        rng = np.random.default_rng(5)
        counts = {0: 0, 2: 0}
        n = 20000
        for _ in range(n):
            counts[top_k_sample(np.array([3.0, 1.0, 2.0, 0.0]), 2, 1.0, rng)] += 1
        e = math.e
        assert counts[0] / n == pytest.approx(e / (e + 1), abs=0.01)
        assert counts[2] / n == pytest.approx(1 / (e + 1), abs=0.01)
