from fractions import Fraction
from unittest import skipUnless

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from lattice_shells.shells import DiagonalForm, count_shell, enumerate_shell
from operators.averages import lp_norm
from operators.grid import GridFunction
from spherelab.exceptions import BirchCriterionViolation, DegenerateFit, InvalidExponent
from .exponents import (
    birch_parameters, restricted_weak_exponent, critical_p, dual_exponent, dyadic_maximal_exponent,
    dyadic_moduli_exponents, error_term_exponent, eta, exponent_table, full_decay_exponent,
    full_decay_threshold, interpolation_bound, restricted_weak_level_exponent, improving_exponent,
    trivial_bound_exponent, trivial_bound_value, young_baseline, theorem_exponent, corollary_exponent,
)
from .fits import ExponentFit, estimate_norm, fit_exponent, fit_log_log
from .power import power_iteration_lower_bound
from .probes import (
    delta_ratio, maximal_l2_check, maximal_probe_ratio, probe_ratio, restricted_weak_probe,
)
from .serializers import BirchParametersSerializer, ExponentFitSerializer, NormRowSerializer

SLOW = settings.LAB['RUN_SLOW_TESTS']
FOUR = DiagonalForm(4, 2)
FIVE = DiagonalForm(5, 2)
CUBIC = DiagonalForm(33, 3)
F = Fraction


class BirchParameterTests(SimpleTestCase):
    def test_five_squares(self):
        params = birch_parameters(FIVE)
        self.assertEqual((params.alpha, params.beta, params.gamma), (F(3, 2), F(3, 2), F(1, 48)))
        self.assertFalse(params.hypothesis_holds)

    def test_cubic(self):
        params = birch_parameters(CUBIC)
        self.assertEqual((params.alpha, params.beta, params.gamma), (F(10), F(31, 3), F(17, 288)))
        self.assertTrue(params.hypothesis_holds)

    def test_four_squares_fail_the_criterion(self):
        with self.assertRaisesMessage(BirchCriterionViolation, "d - dim V > (k-1)2^k"):
            birch_parameters(FOUR)
        params = birch_parameters(FOUR, strict=False)
        self.assertEqual((params.alpha, params.beta), (F(1), F(1)))

    def test_serializer(self):
        data = BirchParametersSerializer(birch_parameters(CUBIC)).data
        self.assertEqual(data['gamma'], '17/288')


class ExponentTests(SimpleTestCase):
    def test_eta_endpoints(self):
        params = birch_parameters(FIVE)
        self.assertEqual(eta(params, 2), 0)
        self.assertEqual(eta(params, 1), params.alpha)

    def test_eta_cubic(self):
        # the gamma branch is the smaller one: 10/3 + 17/432 < 31/9
        self.assertEqual(eta(birch_parameters(CUBIC), F(3, 2)), F(1457, 432))

    def test_eta_is_interpolation_bound(self):
        for form in (FIVE, CUBIC, DiagonalForm(12, 2)):
            params = birch_parameters(form)
            for i in range(1, 51):
                p = 1 + F(i, 51)
                self.assertEqual(eta(params, p), interpolation_bound(params.alpha, params.beta, params.gamma, p))

    def test_interpolation_without_gamma(self):
        for p in (F(1), F(5, 4), F(3, 2), F(2)):
            self.assertEqual(interpolation_bound(F(1), F(2), 0, p), 1 * (2 / p - 1))
        with self.assertRaises(InvalidExponent):
            interpolation_bound(1, 2, 0, F(5, 2))

    def test_trivial_and_improving(self):
        self.assertEqual(trivial_bound_exponent(FOUR, F(5, 3)), F(1, 5))
        self.assertEqual(improving_exponent(4, F(5, 3)), F(2, 5))
        self.assertEqual(trivial_bound_exponent(FOUR, 2), 0)
        self.assertEqual(improving_exponent(4, 2), 0)
        self.assertEqual(improving_exponent(5, F(3, 2)), F(5, 6))
        with self.assertRaises(InvalidExponent):
            improving_exponent(4, F(3, 2))
        self.assertEqual(trivial_bound_exponent(FOUR, '1.6'), F(1, 4))

    def test_operation_names(self):
        self.assertIs(theorem_exponent, improving_exponent)
        self.assertEqual(theorem_exponent(4, F(5, 3)), F(2, 5))
        self.assertEqual(corollary_exponent(4), restricted_weak_exponent(4))

    def test_restricted_weak_exponent(self):
        self.assertEqual(restricted_weak_exponent(4), F(-7, 10))
        for d in range(3, 12):
            self.assertEqual(restricted_weak_level_exponent(d), (d + 1) * restricted_weak_exponent(d))

    def test_dyadic_moduli_balance_at_critical_p(self):
        for d in range(4, 10):
            theta, level_power, block_power = dyadic_moduli_exponents(d, critical_p(d))
            self.assertEqual(theta, F(d - 3, d + 1))
            self.assertEqual(block_power, 0)
            self.assertEqual(level_power, -improving_exponent(d, critical_p(d)))

    def test_error_term_meets_improving_at_critical_p(self):
        for d in range(4, 10):
            self.assertEqual(error_term_exponent(d, critical_p(d)), -improving_exponent(d, critical_p(d)))

    def test_full_decay(self):
        self.assertEqual(full_decay_threshold(FIVE), F(5, 3))
        self.assertEqual(full_decay_threshold(CUBIC, 'weyl'), F(33, 25))
        self.assertEqual(full_decay_threshold(CUBIC, 'steckin'), F(11, 10))
        self.assertEqual(full_decay_exponent(CUBIC, F(3, 2), 'steckin'), 11 * F(1, 3))
        with self.assertRaises(InvalidExponent):
            full_decay_threshold(FOUR)
        with self.assertRaises(InvalidExponent):
            full_decay_exponent(FIVE, F(3, 2))

    def test_dyadic_maximal_positive_inside(self):
        for i in range(1, 20):
            self.assertGreater(dyadic_maximal_exponent(4, 1 + F(i, 20)), 0)
        self.assertEqual(dyadic_maximal_exponent(4, 2), 0)

    def test_young_baseline(self):
        self.assertEqual(young_baseline(1, F(3, 2)), 1.0)
        self.assertEqual(young_baseline(17, 2), 1.0)
        count = count_shell(FOUR, 101)
        uniform = np.full(count, 1.0 / count)
        for p in (F(4, 3), F(5, 3), F(2)):
            r = 1 / (2 - 2 / p)
            self.assertAlmostEqual(young_baseline(count, p), lp_norm(uniform, float(r)), places=12)
            self.assertLessEqual(delta_ratio(count, dual_exponent(p)), young_baseline(count, p) * (1 + 1e-12))
        self.assertAlmostEqual(young_baseline(count, 1), delta_ratio(count, 'inf'), places=15)

    def test_dual_exponent(self):
        self.assertEqual(dual_exponent(F(3, 2)), 3)
        self.assertEqual(dual_exponent(1), float('inf'))
        self.assertEqual(dual_exponent(2), 2)

    def test_table(self):
        table = exponent_table(FOUR, F(5, 3))
        self.assertEqual(table['trivial'], F(1, 5))
        self.assertEqual(table['improving'], F(2, 5))
        self.assertNotIn('full_decay_gauss', table)


class ProbeTests(SimpleTestCase):
    def test_delta_identity(self):
        pairs = ((1, 'inf'), (F(3, 2), 3), (F(5, 3), F(5, 2)), (2, 2))
        for level in (1, 25, 101):
            count = count_shell(FOUR, level)
            for p, q in pairs:
                expected = delta_ratio(count, q)
                self.assertAlmostEqual(probe_ratio('delta', FOUR, level, p, q) / expected, 1.0, places=12)

    def test_ball_beats_delta(self):
        p = F(5, 3)
        ball = probe_ratio('ball', FOUR, 49, p)
        self.assertGreater(ball, probe_ratio('delta', FOUR, 49, p))

    def test_ball_against_the_improving_scale(self):
        size = len(GridFunction.ball(4, 7).support())
        for p in (F(3, 2), F(5, 3), F(7, 4), F(9, 5)):
            ball = probe_ratio('ball', FOUR, 49, p)
            scale = 49 ** -float(improving_exponent(4, p))
            self.assertLess(ball, 4 * scale)
            # ball ratio ~ c·|B|^{-(2/p-1)} with |B| ~ (π²/2)λ²
            normalized = ball * size ** float(2 / p - 1)
            self.assertGreaterEqual(normalized, 0.25, p)
            self.assertLessEqual(normalized, 1.0, p)

    def test_shell_point_is_translated_delta(self):
        y = enumerate_shell(FOUR, 25).points[3]
        custom = GridFunction.indicator([y])
        self.assertAlmostEqual(probe_ratio(custom, FOUR, 25, F(3, 2)), probe_ratio('delta', FOUR, 25, F(3, 2)))

    def test_restricted_weak_examples(self):
        count = count_shell(FOUR, 25)
        table = restricted_weak_probe(FOUR, 25, [2.0, 'inv2N'], [0])
        empty, point = table.rows
        self.assertEqual(empty.size, 0)
        self.assertEqual(point.size, count)
        self.assertEqual(point.set_size, 1)

    def test_restricted_weak_table(self):
        table = restricted_weak_probe(FOUR, 49, [2.0 ** -i for i in range(1, 9)], [1, 3, 7])
        self.assertEqual(len(table.rows), 24)
        self.assertTrue(np.isfinite(table.max_ratio))
        sizes = [row.size for row in table.rows if row.radius == 3]
        self.assertEqual(sizes, sorted(sizes))

    def test_maximal_dominates_each_level(self):
        p = F(3, 2)
        sup = maximal_probe_ratio('delta', FOUR, 4, p)
        for level in (5, 7):
            self.assertGreaterEqual(sup, probe_ratio('delta', FOUR, level, p) * (1 - 1e-12))

    def test_maximal_l2(self):
        ratio = maximal_l2_check(FOUR, 8, seed=2)
        self.assertGreater(ratio, 0)
        self.assertLess(ratio, 1)

    @skipUnless(SLOW, "restricted weak table over odd levels up to 401")
    def test_restricted_weak_no_blowup(self):
        maxima = []
        for level in (25, 49, 101, 201, 401):
            radii = sorted({1, int(np.ceil(level ** 0.25)), int(np.ceil(np.sqrt(level)))})
            table = restricted_weak_probe(FOUR, level, [2.0 ** -i for i in range(1, 13)], radii)
            maxima.append(table.max_ratio)
        self.assertFalse(all(b > a for a, b in zip(maxima, maxima[1:])), maxima)


class PowerIterationTests(SimpleTestCase):
    def test_closed_forms(self):
        count = count_shell(FOUR, 13)
        result = power_iteration_lower_bound(FOUR, 13, 1, 'inf')
        self.assertAlmostEqual(result.estimate, 1 / count, delta=1e-12)
        self.assertEqual(result.status, 'closed_form')
        self.assertAlmostEqual(power_iteration_lower_bound(FOUR, 13, 1, 2).estimate, count ** -0.5, delta=1e-12)

    def test_torus_l2_reaches_one(self):
        result = power_iteration_lower_bound(FOUR, 5, 2, 2, torus=True, M=7, max_iters=300, rel_tol=1e-13)
        self.assertLessEqual(result.estimate, 1 + 1e-12)
        self.assertGreater(result.estimate, 0.999)

    def test_beats_probes(self):
        p = F(5, 3)
        result = power_iteration_lower_bound(FOUR, 13, p, max_iters=20)
        for probe in ('delta', 'ball'):
            self.assertGreaterEqual(result.estimate, probe_ratio(probe, FOUR, 13, p) * (1 - 1e-10))
        self.assertEqual(result.history, sorted(result.history))
        self.assertLessEqual(result.estimate, trivial_bound_value(FOUR, 13, p))

    def test_rejects_exponents(self):
        with self.assertRaises(InvalidExponent):
            power_iteration_lower_bound(FOUR, 5, 3)
        with self.assertRaises(InvalidExponent):
            power_iteration_lower_bound(FOUR, 5, F(3, 2), F(3, 2))

    @skipUnless(SLOW, "power iteration up to lambda=401")
    def test_subconvexity_trend(self):
        p = F(5, 3)
        levels = [49, 99, 151, 201, 301, 401]
        fit = fit_exponent(FOUR, p, levels, method='power_iteration', max_iters=30)
        self.assertGreaterEqual(fit.slope, -0.55)
        self.assertLessEqual(fit.slope, -0.25)
        for level, estimate in fit.pairs:
            self.assertLessEqual(estimate, trivial_bound_value(FOUR, level, p))


class FitTests(SimpleTestCase):
    def test_synthetic_power_law(self):
        levels = [11, 23, 47, 97, 199, 401]
        fit = fit_log_log(levels, [3.0 * level ** -0.4 for level in levels])
        self.assertAlmostEqual(fit.slope, -0.4, delta=1e-9)
        self.assertAlmostEqual(fit.predict(1000), 3.0 * 1000 ** -0.4, places=9)

    def test_constant(self):
        fit = fit_log_log([1, 2, 4, 8, 16], [0.5] * 5)
        self.assertAlmostEqual(fit.slope, 0.0, places=12)

    def test_degenerate(self):
        with self.assertRaises(DegenerateFit):
            fit_log_log([1, 2, 3, 4], [1, 1, 1, 1])
        with self.assertRaises(DegenerateFit):
            fit_log_log([1, 2, 2, 3, 4], [1, 1, 1, 1, 1])
        with self.assertRaises(DegenerateFit):
            fit_log_log([1, 2, 3, 4, 5], [1, 0, 1, 1, 1])

    def test_delta_slope(self):
        p = F(3, 2)
        levels = list(range(101, 2002, 38))
        fit = fit_exponent(FOUR, p, levels, probes=('delta',))
        self.assertAlmostEqual(fit.slope, -2 / 3, delta=0.05)
        self.assertEqual(fit.q, 3)
        data = ExponentFitSerializer(fit).data
        self.assertEqual((data['p'], data['points']), ('3/2', 51))

    def test_row(self):
        row = estimate_norm(FOUR, 25, F(3, 2))
        best = max(probe_ratio(probe, FOUR, 25, F(3, 2)) for probe in ('delta', 'ball'))
        self.assertAlmostEqual(row.estimate, best)
        data = NormRowSerializer(row).data
        self.assertEqual(list(data), ['lambda', 'estimate', 'method', 'iters', 'seconds'])
        self.assertIsInstance(ExponentFit([1], [1.0], 0.0, 0.0, 0.0).pairs, list)
