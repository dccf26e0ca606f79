import numpy as np
import pytest

from extra_lab import (
    MetricSample,
    avg_gradient_norm,
    cesaro_rates,
    classify_point,
    complete_graph,
    consensus_error,
    generate_bilinear_logistic,
    lemma4_certificate,
    make_mixing_pair,
    metropolis_weights,
    quadratic_objectives,
    spectral_radius,
    step_bound_thm1,
    step_bound_thm2,
    t_map_jacobian,
)
from extra_lab.analysis import (
    LABEL_CONSENSUAL_NONSTATIONARY,
    LABEL_NONCONSENSUAL,
    LABEL_SECOND_ORDER,
    LABEL_STRICT_SADDLE,
)
from extra_lab.errors import ParameterError
from extra_lab.objectives import ObjectiveSet, Quadratic

from conftest import random_quadratic_set, sec5_instance


class TestConsensusError:
    def test_consensual_point(self):
        x = np.tile([1.5, -2.0], (7, 1))
        assert consensus_error(x) == 0.0

    def test_two_agent_antisymmetric(self):
        assert consensus_error(np.array([[1.0], [-1.0]])) == pytest.approx(
            np.sqrt(2.0), abs=1e-14
        )

    def test_single_agent_always_zero(self):
        assert consensus_error(np.array([[3.7, -5.1]])) == 0.0

    def test_zero_iff_consensual(self):
        gen = np.random.default_rng(8)
        for _ in range(20):
            base = gen.normal(size=(1, 3))
            x = np.tile(base, (6, 1))
            assert consensus_error(x) < 1e-12
            x_perturbed = x.copy()
            x_perturbed[2, 1] += 1e-6
            assert consensus_error(x_perturbed) > 1e-8


class TestAvgGradientNorm:
    def test_hand_example_cancellation(self):
        obj = ObjectiveSet(
            [
                Quadratic(np.array([[1.0]]), np.array([0.0])),
                Quadratic(np.array([[1.0]]), np.array([-2.0]), c=2.0),
            ]
        )
        x = np.array([[1.0], [1.0]])  # gradients (1, -1) average to zero
        assert avg_gradient_norm(obj, x) == pytest.approx(0.0, abs=1e-15)

    def test_single_agent(self):
        obj = quadratic_objectives([np.diag([2.0, 1.0])])
        x = np.array([[1.0, 3.0]])
        assert avg_gradient_norm(obj, x) == pytest.approx(
            np.linalg.norm([2.0, 3.0]), rel=1e-14
        )

    def test_consensual_stationary_point(self):
        g, pair, obj = sec5_instance()
        saddle = np.zeros((20, 2))
        assert avg_gradient_norm(obj, saddle) == 0.0


class TestStepBounds:
    def test_unit_lipschitz(self):
        assert step_bound_thm1(0.0, 1.0) == pytest.approx(1.0 / 61.0, rel=1e-15)

    def test_vanishes_as_contraction_degrades(self):
        assert step_bound_thm1(1.0 - 1e-12, 1.0) < 1e-11

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            step_bound_thm1(1.0, 1.0)
        with pytest.raises(ParameterError):
            step_bound_thm1(-0.1, 1.0)
        with pytest.raises(ParameterError):
            step_bound_thm1(0.5, 0.0)
        with pytest.raises(ParameterError):
            step_bound_thm2(0.5, 1.0, 0.0)

    def test_thm2_min_semantics(self):
        assert step_bound_thm2(0.0, 1.0, 0.5) == pytest.approx(1.0 / 61.0, rel=1e-15)
        # large L: the lambda_min(V)/L branch eventually wins
        b1 = step_bound_thm1(0.0, 100.0)
        assert step_bound_thm2(0.0, 100.0, 0.001) == pytest.approx(min(b1, 1e-5), rel=1e-12)

    def test_below_inverse_lipschitz(self):
        g, pair, obj = sec5_instance()
        L = obj.lipschitz_bound(5.0)
        bound = step_bound_thm1(pair.spectral.lambda1_P, L)
        assert 0.0 < bound < 1.0 / L


class TestClassifyPoint:
    def test_sec5_origin_is_strict_saddle(self):
        g, pair, obj = sec5_instance()
        s = obj.data.labels * obj.data.features
        assert abs(s.sum()) / (2 * 20) > 0.1  # seed gives a genuine saddle
        verdict = classify_point(obj, np.zeros((20, 2)))
        assert verdict.label == LABEL_STRICT_SADDLE
        expected_lam = 0.1 - abs(s.sum()) / 40.0
        assert verdict.lambda_min_sum_hessian == pytest.approx(expected_lam, rel=1e-10)

    def test_consensual_minimizer_second_order(self):
        obj = quadratic_objectives([np.diag([1.0, 2.0])] * 4)
        verdict = classify_point(obj, np.zeros((4, 2)))
        assert verdict.label == LABEL_SECOND_ORDER

    def test_nonconsensual(self):
        obj = quadratic_objectives([np.eye(1)] * 2)
        verdict = classify_point(obj, np.array([[1.0], [-1.0]]))
        assert verdict.label == LABEL_NONCONSENSUAL
        assert verdict.consensus_residual == pytest.approx(np.sqrt(2.0), abs=1e-14)

    def test_consensual_nonstationary(self):
        obj = quadratic_objectives([np.eye(1)] * 3)
        verdict = classify_point(obj, np.full((3, 1), 2.0))
        assert verdict.label == LABEL_CONSENSUAL_NONSTATIONARY

    def test_tolerance_monotonicity(self):
        order = {label: i for i, label in enumerate(
            (LABEL_NONCONSENSUAL, LABEL_CONSENSUAL_NONSTATIONARY,
             LABEL_SECOND_ORDER, LABEL_STRICT_SADDLE)
        )}
        gen = np.random.default_rng(13)
        obj = generate_bilinear_logistic(6, 0.1, seed=2)
        for _ in range(30):
            x = np.tile(gen.normal(size=(1, 2)), (6, 1)) + 1e-5 * gen.normal(size=(6, 2))
            tight = classify_point(obj, x, 1e-8, 1e-8, 1e-10)
            loose = classify_point(obj, x, 1e-3, 1e-3, 1e-6)
            # loosening tolerances never downgrades toward nonconsensual
            assert order[loose.label] >= order[tight.label] or (
                {loose.label, tight.label} == {LABEL_SECOND_ORDER, LABEL_STRICT_SADDLE}
            )

    def test_positive_tolerances_required(self):
        obj = quadratic_objectives([np.eye(1)])
        with pytest.raises(ParameterError):
            classify_point(obj, np.zeros((1, 1)), tol_consensus=0.0)


class TestTMapJacobian:
    def test_single_agent_quadratic(self):
        g, pair, obj = _single_quadratic()
        DT = t_map_jacobian(obj, np.array([[0.0]]), 0.1, pair)
        assert np.allclose(DT, [[0.9, 1.0], [0.0, 1.0]], atol=1e-15)
        eigs = np.sort(np.linalg.eigvals(DT).real)
        assert eigs == pytest.approx([0.9, 1.0], abs=1e-12)
        assert np.linalg.det(DT) == pytest.approx(0.9, rel=1e-12)

    def test_alpha_zero_objective_independent(self):
        g, pair, obj = sec5_instance()
        gen = np.random.default_rng(3)
        DT1 = t_map_jacobian(obj, gen.normal(size=(20, 2)), 0.0, pair)
        DT2 = t_map_jacobian(obj, gen.normal(size=(20, 2)), 0.0, pair)
        assert np.array_equal(DT1, DT2)
        Wh = np.kron(pair.W, np.eye(2))
        Vh = np.kron(pair.V, np.eye(2))
        assert np.array_equal(DT1[:40, :40], Wh)
        assert np.array_equal(DT1[40:, :40], Wh - Vh)

    def test_block_structure_matches_manual_assembly(self):
        gen = np.random.default_rng(14)
        obj = random_quadratic_set(gen, 3, 2)
        g = complete_graph(3)
        pair = make_mixing_pair(metropolis_weights(g), 0.3, g)
        x = gen.normal(size=(3, 2))
        DT = t_map_jacobian(obj, x, 0.07, pair)
        Wh = np.kron(pair.W, np.eye(2))
        Vh = np.kron(pair.V, np.eye(2))
        HF = obj.stacked_hessian(x)
        manual = np.block(
            [[Wh - 0.07 * HF, np.eye(6)], [Wh - Vh, np.eye(6)]]
        )
        assert np.array_equal(DT, manual)

    def test_saddle_instability_sec5(self):
        g, pair, obj = sec5_instance()
        saddle = np.zeros((20, 2))
        assert classify_point(obj, saddle).label == LABEL_STRICT_SADDLE
        for alpha in (0.01, 0.05, 0.2):
            rho = spectral_radius(t_map_jacobian(obj, saddle, alpha, pair))
            assert rho > 1.0 + 1e-8


def _single_quadratic():
    g = complete_graph(1)
    pair = make_mixing_pair(metropolis_weights(g), 0.5, g)
    obj = quadratic_objectives([np.array([[1.0]])])
    return g, pair, obj


class TestLemma4Certificate:
    def test_single_agent(self):
        g, pair, obj = _single_quadratic()
        cert = lemma4_certificate(obj, np.array([[0.0]]), 0.1, pair)
        assert cert.det == pytest.approx(0.9, rel=1e-12)
        assert cert.invertible

    def test_safe_alpha_invertible_on_random_instances(self):
        gen = np.random.default_rng(15)
        for _ in range(20):
            m = int(gen.integers(2, 9))
            g = complete_graph(m)
            pair = make_mixing_pair(metropolis_weights(g), 0.5, g)
            obj = random_quadratic_set(gen, m, int(gen.integers(1, 3)))
            L = obj.lipschitz_bound(1.0)
            alpha = 0.9 * pair.spectral.lambda_min_V / L
            x = gen.normal(size=(m, obj.n))
            assert lemma4_certificate(obj, x, alpha, pair).invertible

    def test_spectrum_matched_singular_alpha(self):
        # identical unit quadratics: V_hat - alpha*I is singular exactly at
        # alpha = lambda_min(V)
        m = 6
        g = complete_graph(m)
        pair = make_mixing_pair(metropolis_weights(g), 0.5, g)
        obj = quadratic_objectives([np.eye(2)] * m)
        alpha = pair.spectral.lambda_min_V
        cert = lemma4_certificate(obj, np.zeros((m, 2)), alpha, pair)
        assert not cert.invertible

    def test_nonpositive_alpha_rejected(self):
        g, pair, obj = _single_quadratic()
        with pytest.raises(ParameterError):
            lemma4_certificate(obj, np.array([[0.0]]), 0.0, pair)


def _series(values):
    return [MetricSample(k=k + 1, consensus_error=v, avg_grad_norm=v, objective=0.0)
            for k, v in enumerate(values)]


class TestCesaroRates:
    def test_constant_zero_series(self):
        rates = cesaro_rates(_series(np.zeros(100)))
        assert rates.consensus_error.partial_sums_bounded
        assert rates.consensus_error.loglog_slope == float("-inf")

    def test_inverse_square_metric(self):
        ks = np.arange(1, 2001)
        rates = cesaro_rates(_series(3.0 / ks))  # squared metric = 9/k^2
        assert rates.avg_grad_norm.partial_sums_bounded
        assert rates.avg_grad_norm.loglog_slope == pytest.approx(-1.0, abs=0.05)

    def test_constant_one_metric(self):
        rates = cesaro_rates(_series(np.ones(500)))
        assert not rates.consensus_error.partial_sums_bounded
        assert abs(rates.consensus_error.loglog_slope) < 0.01

    def test_short_series_rejected(self):
        with pytest.raises(ParameterError):
            cesaro_rates(_series(np.ones(49)))
