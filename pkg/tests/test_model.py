import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bell_lab.model import (
    AnalyzerSettings,
    ProbabilityQuad,
    StateModel,
    lhv_correlation,
    lhv_probabilities,
    lhv_response,
    predict_probabilities,
)

from conftest import brute_force_quad

angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
visibilities = st.floats(min_value=0.0, max_value=1.0)
thetas = st.floats(min_value=1e-3, max_value=math.pi / 2 - 1e-3)


def _models(draw_theta, v):
    return [StateModel.max_entangled(v), StateModel.nonmax_entangled(draw_theta, v)]


class TestPredictExamples:
    def test_parallel_settings(self):
        q = predict_probabilities(StateModel.max_entangled(), AnalyzerSettings(0.0, 0.0))
        assert q.as_tuple() == pytest.approx((0.5, 0.0, 0.0, 0.5), abs=1e-15)

    def test_symmetry_point(self):
        q = predict_probabilities(StateModel.max_entangled(), AnalyzerSettings(0.0, math.pi / 4))
        assert q.as_tuple() == pytest.approx((0.25,) * 4, abs=1e-15)

    def test_thirty_degrees_matches_state_vector(self):
        q = predict_probabilities(StateModel.max_entangled(), AnalyzerSettings(0.0, math.pi / 6))
        oracle = brute_force_quad(math.pi / 4, 0.0, math.pi / 6)
        np.testing.assert_allclose(oracle, [0.375, 0.125, 0.125, 0.375], atol=1e-15)
        np.testing.assert_allclose(q.as_array(), oracle, atol=1e-15)

    def test_nonmax_parallel(self):
        q = predict_probabilities(StateModel.nonmax_entangled(0.6), AnalyzerSettings(0.0, 0.0))
        oracle = brute_force_quad(0.6, 0.0, 0.0)
        np.testing.assert_allclose(oracle, [math.cos(0.6) ** 2, 0.0, 0.0, math.sin(0.6) ** 2], atol=1e-15)
        np.testing.assert_allclose(oracle, [0.68117, 0.0, 0.0, 0.31883], atol=1e-5)
        np.testing.assert_allclose(q.as_array(), oracle, atol=1e-15)

    @pytest.mark.parametrize("alpha,beta", [(0.0, 0.0), (0.3, 1.7), (-2.0, 5.0)])
    def test_full_depolarization(self, alpha, beta):
        q = predict_probabilities(StateModel.max_entangled(0.0), AnalyzerSettings(alpha, beta))
        assert q.as_tuple() == (0.25, 0.25, 0.25, 0.25)


class TestPredictContract:
    def test_rejects_lhv(self):
        with pytest.raises(ValueError, match="LHV"):
            predict_probabilities(StateModel.lhv(), AnalyzerSettings(0.0, 0.0))

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite_angles(self, bad):
        with pytest.raises(ValueError):
            AnalyzerSettings(bad, 0.0)

    @pytest.mark.parametrize("v", [-0.01, 1.01, math.nan])
    def test_rejects_bad_visibility(self, v):
        with pytest.raises(ValueError):
            StateModel.max_entangled(v)

    @pytest.mark.parametrize("theta", [0.0, math.pi / 2, -0.1, 2.0])
    def test_rejects_theta_outside_open_interval(self, theta):
        with pytest.raises(ValueError):
            StateModel.nonmax_entangled(theta)

    def test_quad_validation(self):
        with pytest.raises(ValueError):
            ProbabilityQuad(0.5, 0.5, 0.5, -0.5)
        with pytest.raises(ValueError):
            ProbabilityQuad(0.3, 0.3, 0.3, 0.3)


class TestModelProperties:
    def test_normalization_random_settings(self, rng):
        for alpha, beta, theta, v in zip(
            rng.uniform(-7, 7, 1000), rng.uniform(-7, 7, 1000),
            rng.uniform(0.01, 1.56, 1000), rng.uniform(0, 1, 1000),
        ):
            for model in _models(theta, v):
                q = predict_probabilities(model, AnalyzerSettings(alpha, beta))
                assert abs(sum(q.as_tuple()) - 1.0) <= 1e-12
                assert min(q.as_tuple()) >= 0.0

    @given(angles, angles, thetas, visibilities)
    def test_period_pi(self, alpha, beta, theta, v):
        for model in _models(theta, v):
            base = predict_probabilities(model, AnalyzerSettings(alpha, beta)).as_array()
            np.testing.assert_allclose(
                predict_probabilities(model, AnalyzerSettings(alpha + math.pi, beta)).as_array(), base, atol=1e-12)
            np.testing.assert_allclose(
                predict_probabilities(model, AnalyzerSettings(alpha, beta + math.pi)).as_array(), base, atol=1e-12)

    def test_nonmax_reduces_to_max(self, rng):
        for alpha, beta in rng.uniform(-7, 7, (1000, 2)):
            s = AnalyzerSettings(alpha, beta)
            np.testing.assert_allclose(
                predict_probabilities(StateModel.nonmax_entangled(math.pi / 4), s).as_array(),
                predict_probabilities(StateModel.max_entangled(), s).as_array(),
                atol=1e-12,
            )

    def test_matches_state_vector_everywhere(self, rng):
        for alpha, beta, theta in zip(rng.uniform(-4, 4, 300), rng.uniform(-4, 4, 300), rng.uniform(0.01, 1.56, 300)):
            q = predict_probabilities(StateModel.nonmax_entangled(theta), AnalyzerSettings(alpha, beta))
            np.testing.assert_allclose(q.as_array(), brute_force_quad(theta, alpha, beta), atol=1e-12)

    def test_marginal_bias(self, rng):
        for alpha, beta, theta in zip(rng.uniform(-4, 4, 500), rng.uniform(-4, 4, 500), rng.uniform(0.01, 1.56, 500)):
            s = AnalyzerSettings(alpha, beta)
            q = predict_probabilities(StateModel.max_entangled(), s)
            assert q.p_pp + q.p_pm == pytest.approx(0.5, abs=1e-12)
            qn = predict_probabilities(StateModel.nonmax_entangled(theta), s)
            expected = math.cos(theta) ** 2 * math.cos(alpha) ** 2 + math.sin(theta) ** 2 * math.sin(alpha) ** 2
            oracle = brute_force_quad(theta, alpha, beta)
            assert oracle[0] + oracle[1] == pytest.approx(expected, abs=1e-12)
            assert qn.p_pp + qn.p_pm == pytest.approx(expected, abs=1e-12)

    @given(angles, angles, visibilities)
    def test_visibility_is_convex_mixture(self, alpha, beta, v):
        s = AnalyzerSettings(alpha, beta)
        pure = predict_probabilities(StateModel.max_entangled(), s).as_array()
        mixed = predict_probabilities(StateModel.max_entangled(v), s).as_array()
        np.testing.assert_allclose(mixed, v * pure + (1 - v) * 0.25, atol=1e-15)


class TestLhv:
    def test_response_examples(self):
        assert lhv_response(0.0, 0.0) == 1
        assert lhv_response(0.0, math.pi / 2) == -1
        assert lhv_response(math.pi / 4, 0.0) == 1

    def test_response_vectorized(self):
        out = lhv_response(np.array([0.0, math.pi / 2]), 0.0)
        assert out.tolist() == [1, -1]

    @pytest.mark.parametrize("delta,expected", [
        (0.0, 1.0), (math.pi / 8, 0.5), (math.pi / 4, 0.0), (math.pi / 2, -1.0),
        (3 * math.pi / 4, 0.0), (math.pi, 1.0),
    ])
    def test_sawtooth_closed_form(self, delta, expected):
        assert lhv_correlation(AnalyzerSettings(0.3, 0.3 + delta)) == pytest.approx(expected, abs=1e-12)

    def test_sawtooth_symmetric_and_periodic(self, rng):
        for a, b in rng.uniform(-5, 5, (200, 2)):
            e = lhv_correlation(AnalyzerSettings(a, b))
            assert -1.0 <= e <= 1.0
            assert lhv_correlation(AnalyzerSettings(b, a)) == pytest.approx(e, abs=1e-12)
            assert lhv_correlation(AnalyzerSettings(a + math.pi, b)) == pytest.approx(e, abs=1e-9)

    @pytest.mark.parametrize("delta", [0.0, math.pi / 8, math.pi / 4, 0.9, math.pi / 2, 2.5])
    def test_sawtooth_vs_sampling(self, delta):
        n = 10**6
        lam = np.random.default_rng(11).uniform(0.0, math.pi, n)
        products = lhv_response(lam, 0.2) * lhv_response(lam, 0.2 + delta)
        mean = products.mean()
        se = max(products.std(ddof=1) / math.sqrt(n), 1e-12)
        assert abs(mean - lhv_correlation(AnalyzerSettings(0.2, 0.2 + delta))) <= 3 * se + 1e-12

    def test_lhv_quad_marginals_match_sampling(self):
        # oracle: tabulate joint outcomes of the response function directly
        lam = np.random.default_rng(5).uniform(0.0, math.pi, 10**6)
        a = lhv_response(lam, 0.1)
        b = lhv_response(lam, 0.1 + 0.5)
        freq = [np.mean((a == sa) & (b == sb)) for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
        np.testing.assert_allclose(lhv_probabilities(AnalyzerSettings(0.1, 0.6)).as_array(), freq, atol=3e-3)
