from itertools import product
from unittest import skipUnless
from unittest.mock import patch

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings
from scipy.integrate import quad

from arith_sums.sums import e, kloosterman, units
from lattice_shells.shells import DiagonalForm, count_shell
from norm_lab.fits import fit_log_log
from operators.averages import ArithmeticMeasure, sigma_hat
from spherelab.exceptions import (
    InvalidForm, NumericalDrift, QuadratureBudgetExceeded, RegimeViolation, SampleBudgetExceeded,
)
from .bump import BumpPsi, psi, psi_hat, psi_hat_direct, smoothstep
from .kernel import kernel_identity_check, main_kernel_ratio, sphere_side, summed_kernel_check
from .multipliers import (
    arc_term, dyadic_cutoff, error_multiplier, exact_multiplier, high_envelope, low_high_split,
    main_term_multiplier, modulus_cutoff, sample_multiplier, singular_density,
)
from .scans import error_multiplier_scan, fold
from .serializers import ErrorScanSerializer, KernelCheckSerializer
from .sphere import SphereQuadrature, sphere_ft, sphere_ft_decay_constant, sphere_nodes

SLOW = settings.LAB['RUN_SLOW_TESTS']
TOL = settings.LAB['TOLERANCES']
FOUR = DiagonalForm(4, 2)
# frozen once from sphere_ft_decay_constant(4); the maximum sits near r = 0.12
DECAY_CONSTANT_4 = 1.2


class BumpTests(SimpleTestCase):
    def test_plateau_and_support(self):
        bump = BumpPsi(3)
        rng = np.random.default_rng(1)
        inner = (rng.random((500, 3)) - 0.5) / 4
        np.testing.assert_array_equal(bump(inner), 1.0)
        outer = rng.random((500, 3)) * 0.25 + 0.25
        outer[:, 1:] = 0.0
        np.testing.assert_array_equal(bump(outer), 0.0)

    def test_range_and_symmetry(self):
        t = np.linspace(-0.4, 0.4, 2001)
        values = psi(t)
        self.assertTrue(np.all((values >= 0) & (values <= 1)))
        np.testing.assert_allclose(values, psi(-t), atol=0)
        ramp = values[(t > 0.125) & (t < 0.25)]
        self.assertTrue(np.all(np.diff(ramp) <= 1e-15))

    def test_nonnegative_at_the_support_edge(self):
        t = np.concatenate([np.linspace(0.24, 0.25, 20001), -np.linspace(0.24, 0.25, 20001)])
        values = psi(t)
        self.assertGreaterEqual(values.min(), 0.0)
        self.assertLessEqual(smoothstep(np.linspace(0.99, 1.0, 2001)).max(), 1.0)
        self.assertGreaterEqual(BumpPsi(4)(np.column_stack([t, t, t, t])).min(), 0.0)

    def test_smoothstep_ends(self):
        self.assertEqual(smoothstep(0.0), 0.0)
        self.assertAlmostEqual(float(smoothstep(1.0)), 1.0, places=14)
        self.assertAlmostEqual(float(smoothstep(0.5)), 0.5, places=7)

    def test_fourier_transform(self):
        for u in (0.0, 0.7, 3.0, 11.5):
            direct = quad(lambda t: float(psi(np.array([t]))[0]) * np.cos(2 * np.pi * u * t), -0.25, 0.25,
                          points=[-0.125, 0.125], limit=200)[0]
            self.assertAlmostEqual(float(psi_hat_direct(u)), direct, places=8)

    def test_spline_matches_direct(self):
        u = np.linspace(0, 90, 5001)
        self.assertLess(np.abs(psi_hat(u) - psi_hat_direct(u)).max(), 1e-10)
        self.assertAlmostEqual(float(psi_hat(120.0)), float(psi_hat_direct(120.0)))


class SphereTransformTests(SimpleTestCase):
    def test_total_mass(self):
        for d in (2, 3, 4, 5, 8):
            self.assertEqual(sphere_ft(d, 0.0), 1.0)

    def test_three_dimensional_closed_form(self):
        self.assertAlmostEqual(sphere_ft(3, 1.0), 0.0, places=12)
        r = np.linspace(0.01, 20, 400)
        np.testing.assert_allclose(sphere_ft(3, r), np.sin(2 * np.pi * r) / (2 * np.pi * r), atol=1e-10)

    def test_series_meets_bessel(self):
        for d in (3, 4, 6):
            below = sphere_ft(d, 0.5 - 1e-12)
            above = sphere_ft(d, 0.5 + 1e-12)
            self.assertAlmostEqual(below, above, places=9)

    def test_quadrature_oracle(self):
        for r in (0.3, 1.7, 4.0, 10.0):
            rule = SphereQuadrature(4, sphere_nodes(r))
            value = rule.integrate_function(lambda w: np.cos(2 * np.pi * r * w[:, 0]))
            self.assertAlmostEqual(float(value), sphere_ft(4, r), places=8)

    def test_quadrature_at_high_frequency(self):
        for r in (10.0, 10.3, 20.0, 20.3):
            rule = SphereQuadrature(3, sphere_nodes(r))
            value = rule.integrate_function(lambda w: np.cos(2 * np.pi * r * w[:, 0]))
            self.assertAlmostEqual(float(value), sphere_ft(3, r), places=9)

    @skipUnless(SLOW, "1.4e7-point rule")
    def test_quadrature_at_high_frequency_four_dimensions(self):
        rule = SphereQuadrature(4, sphere_nodes(20.0))
        value = rule.integrate_function(lambda w: np.cos(2 * np.pi * 20.0 * w[:, 0]))
        self.assertAlmostEqual(float(value), sphere_ft(4, 20.0), places=8)

    def test_decay(self):
        self.assertLessEqual(sphere_ft_decay_constant(4, r_max=100.0, samples=50001), DECAY_CONSTANT_4)
        self.assertLessEqual(abs(sphere_ft(4, 10.0)), DECAY_CONSTANT_4 * 10.0 ** -1.5)

    def test_rule_is_probability(self):
        rule = SphereQuadrature(4, 20)
        self.assertAlmostEqual(rule.weights.sum(), 1.0, places=13)
        np.testing.assert_allclose(np.linalg.norm(rule.points, axis=1), 1.0, atol=1e-13)
        self.assertAlmostEqual(float(rule.integrate(rule.points[:, 2] ** 2)), 0.25, places=12)


class MainTermTests(SimpleTestCase):
    def test_cutoffs(self):
        self.assertEqual(dyadic_cutoff(25), 32)
        self.assertEqual(dyadic_cutoff(32), 64)
        self.assertEqual(modulus_cutoff(25), 5)
        self.assertEqual(modulus_cutoff(1), 1)

    def test_density_is_inverse_singular_series(self):
        for level in (5, 25, 101):
            self.assertAlmostEqual(singular_density(FOUR, level), np.pi ** 2 * level / count_shell(FOUR, level))

    def test_q_one_term_at_origin(self):
        self.assertEqual(arc_term(FOUR, 25, 1, np.zeros(4)), 1)

    def test_origin_is_truncated_singular_series(self):
        raw = main_term_multiplier(FOUR, 25, np.zeros(4), normalize=False)
        expected = sum(kloosterman(FOUR, q, 25) for q in range(1, 6))
        self.assertAlmostEqual(raw, expected)

    def test_vanishes_off_arcs(self):
        self.assertEqual(main_term_multiplier(FOUR, 3, (0.3, 0, 0, 0)), 0)

    def test_matches_double_sum_oracle(self):
        level, xi = 25, np.array([0.5, 0.0, 0.0, 0.0])
        bump = BumpPsi(4)
        oracle = 0j
        for q in range(1, modulus_cutoff(level) + 1):
            base = np.rint(q * xi).astype(int)
            for shift in product((-1, 0, 1), repeat=4):
                m = base + np.array(shift)
                cutoff = bump(q * xi - m)
                if cutoff == 0:
                    continue
                residues = np.indices((q,) * 4).reshape(4, -1).T
                for a in units(q):
                    gauss = np.mean(e((a * FOUR(residues) + residues @ m) / q))
                    radial = sphere_ft(4, np.sqrt(level) * np.linalg.norm(xi - m / q))
                    oracle += e(-a * level / q) * gauss * cutoff * radial
        self.assertAlmostEqual(main_term_multiplier(FOUR, level, xi, normalize=False), oracle)

    def test_value_at_rational_is_kloosterman(self):
        for q0, m0 in ((2, (1, 0, 0, 0)), (3, (1, 1, 0, 0)), (5, (2, 1, 0, 1))):
            xi = np.asarray(m0) / q0
            self.assertAlmostEqual(arc_term(FOUR, 25, q0, xi), kloosterman(FOUR, q0, 25, m0))

    def test_even_and_real(self):
        rng = np.random.default_rng(4)
        xi = rng.random((300, 4)) - 0.5
        values = main_term_multiplier(FOUR, 41, xi)
        self.assertLess(np.abs(values.imag).max(), TOL['imag_part'])
        np.testing.assert_allclose(values, main_term_multiplier(FOUR, 41, -xi), atol=1e-12)

    def test_sphere_only(self):
        with self.assertRaises(InvalidForm):
            main_term_multiplier(DiagonalForm(4, 3), 5, np.zeros(4))


class ExactAndErrorTests(SimpleTestCase):
    def test_orbit_sum_matches_direct(self):
        rng = np.random.default_rng(5)
        xi = rng.random((100, 4)) - 0.5
        for level in (1, 6, 25):
            mu = ArithmeticMeasure.for_level(FOUR, level)
            np.testing.assert_allclose(exact_multiplier(mu, xi), sigma_hat(mu, xi).real, atol=1e-12)

    def test_error_is_exact_minus_main(self):
        mu = ArithmeticMeasure.for_level(FOUR, 25)
        xi = np.random.default_rng(6).random((50, 4)) - 0.5
        np.testing.assert_allclose(
            error_multiplier(mu, xi), exact_multiplier(mu, xi) - main_term_multiplier(FOUR, 25, xi), atol=1e-14,
        )

    def test_samples_are_real(self):
        mu = ArithmeticMeasure.for_level(FOUR, 25)
        xi = np.random.default_rng(7).random((40, 4)) - 0.5
        exact, main, error = (sample_multiplier(mu, xi, kind) for kind in ('exact', 'main', 'error'))
        self.assertFalse(np.iscomplexobj(main.values))
        np.testing.assert_allclose(error.values, exact.values - main.values, atol=1e-13)
        self.assertEqual(main.cutoff, 32)
        self.assertAlmostEqual(error.sup, np.abs(error.values).max())
        with self.assertRaises(ValueError):
            sample_multiplier(mu, xi, 'low')

    def test_imaginary_drift_raises(self):
        mu = ArithmeticMeasure.for_level(FOUR, 25)
        drifted = lambda form, level, xi, normalize=True: np.full(len(xi), 0.5 + 1e-6j)
        with patch('multiplier_lab.multipliers.main_term_multiplier', drifted):
            with self.assertRaises(NumericalDrift) as caught:
                sample_multiplier(mu, np.zeros((3, 4)), 'main')
            self.assertEqual(caught.exception.detail['kind'], 'main')
            loose = sample_multiplier(mu, np.zeros((3, 4)), 'main', tolerance=1e-3)
        np.testing.assert_array_equal(loose.values, 0.5)


class ErrorScanTests(SimpleTestCase):
    def test_small_level(self):
        scan = error_multiplier_scan(ArithmeticMeasure.for_level(FOUR, 1), resolution=6, random_samples=2000)
        self.assertLessEqual(scan.sup_estimate, 2.0)
        self.assertGreater(scan.samples, 2000)

    def test_refinement_never_decreases(self):
        scan = error_multiplier_scan(ArithmeticMeasure.for_level(FOUR, 25), resolution=6, random_samples=3000, seed=3)
        sups = [entry[2] for entry in scan.history]
        self.assertEqual(sups, sorted(sups))
        self.assertTrue(any(stage.startswith('refine') for stage, _, _ in scan.history))

    def test_deterministic_report(self):
        mu = ArithmeticMeasure.for_level(FOUR, 9)
        first = error_multiplier_scan(mu, resolution=4, random_samples=500, seed=11).report()
        second = error_multiplier_scan(mu, resolution=4, random_samples=500, seed=11).report()
        self.assertEqual(first, second)
        self.assertEqual(sorted(first), ['argmax_xi', 'cutoff', 'lambda', 'samples', 'seed', 'sup_estimate'])
        self.assertEqual(ErrorScanSerializer(error_multiplier_scan(mu, 4, 500, seed=11)).data['lambda'], 9)

    def test_budget(self):
        with self.assertRaises(SampleBudgetExceeded):
            error_multiplier_scan(ArithmeticMeasure.for_level(FOUR, 9), resolution=4, random_samples=10, budget=50)

    def test_fold(self):
        np.testing.assert_allclose(fold([0.9, -0.2, 0.3, 0.0]), [0.3, 0.2, 0.1, 0.0])

    @skipUnless(SLOW, "acceptance-scale error decay")
    def test_error_decay_trend(self):
        levels = [49, 101, 201, 401, 801]
        sups = []
        for level in levels:
            scan = error_multiplier_scan(ArithmeticMeasure.for_level(FOUR, level), resolution=12,
                                         random_samples=200000, seed=level)
            sups.append(scan.sup_estimate)
        self.assertLessEqual(fit_log_log(levels, sups).slope, -0.10)


class KernelTests(SimpleTestCase):
    def test_single_arc_at_origin(self):
        check = kernel_identity_check(FOUR, 0, 1, 4, (0, 0, 0, 0))
        self.assertLessEqual(check.residual, TOL['kernel_residual'])

    def test_reduces_the_rational_point(self):
        check = kernel_identity_check(FOUR, 5, 4, 16, (1, 0, 0, 0))
        self.assertEqual(check.a, 1)
        with self.assertRaises(ValueError):
            kernel_identity_check(FOUR, 2, 4, 16, (1, 0, 0, 0))

    def test_phase_flip(self):
        even = kernel_identity_check(FOUR, 1, 2, 16, (1, 1, 0, 0))
        odd = kernel_identity_check(FOUR, 1, 2, 16, (1, 0, 0, 0))
        self.assertLessEqual(even.residual, TOL['kernel_residual'])
        self.assertLessEqual(odd.residual, TOL['kernel_residual'])
        np.testing.assert_allclose(even.right, sphere_side(FOUR, 2, 16, (1, 1, 0, 0)), atol=1e-15)
        np.testing.assert_allclose(odd.right, -sphere_side(FOUR, 2, 16, (1, 0, 0, 0)), atol=1e-15)

    def test_sampled_points(self):
        rng = np.random.default_rng(8)
        checks = []
        for q in (1, 3):
            for _ in range(3):
                x = rng.integers(-4, 5, size=4)
                checks.append(kernel_identity_check(FOUR, 1 if q > 1 else 0, q, 16, x))
        for check in checks:
            self.assertLessEqual(check.residual, TOL['kernel_residual'])
        self.assertTrue(all(np.isfinite(c.envelope_ratio) for c in checks))
        data = KernelCheckSerializer(checks[0]).data
        self.assertEqual(data['lambda'], 16)

    def test_serialized_check_keeps_imaginary_parts(self):
        check = kernel_identity_check(FOUR, 1, 4, 16, (1, 0, 0, 0))
        data = KernelCheckSerializer(check).data
        self.assertEqual(data['right_imag'], check.right.imag)
        self.assertEqual(data['left_imag'], check.left.imag)
        self.assertAlmostEqual(abs(complex(data['left'], data['left_imag']) - complex(data['right'], data['right_imag'])),
                               data['residual'], places=15)

    @skipUnless(SLOW, "acceptance-scale kernel identity")
    def test_acceptance_grid(self):
        rng = np.random.default_rng(9)
        for level in (16, 64, 100):
            radius = 2 * np.sqrt(level)
            for q in (1, 2, 3, 4):
                a = 0 if q == 1 else 1
                taken = 0
                while taken < 10:
                    x = rng.integers(-int(radius), int(radius) + 1, size=4)
                    if np.linalg.norm(x) > radius:
                        continue
                    check = kernel_identity_check(FOUR, a, q, level, x)
                    self.assertLessEqual(check.residual, TOL['kernel_residual'], (level, q, tuple(x)))
                    taken += 1

    def test_sphere_side_far_from_the_sphere(self):
        for q, level, x in ((1, 16, (12, 9, 0, 0)), (2, 64, (30, 5, 0, 0))):
            default = sphere_side(FOUR, q, level, x)
            finer = sphere_side(FOUR, q, level, x, n=120)
            self.assertLess(abs(default - finer), 1e-11)
            self.assertLessEqual(kernel_identity_check(FOUR, q - 1, q, level, x).residual, TOL['kernel_residual'])

    def test_summed_kernel_bound(self):
        for q in (2, 3, 4):
            for x in ((1, 2, 0, 0), (3, 1, 1, 0)):
                row = summed_kernel_check(FOUR, q, 16, x)
                self.assertLessEqual(row.summed, row.bound * (1 + 1e-9) + 1e-15)
                self.assertLess(abs(row.ramanujan), q)

    def test_main_kernel_bounded(self):
        ratios = [main_kernel_ratio(FOUR, level, x) for level in (16, 36) for x in ((0, 0, 0, 0), (4, 0, 0, 0), (2, 2, 1, 1))]
        self.assertLess(max(ratios), 10.0)

    @override_settings(LAB={**settings.LAB, 'QUADRATURE_POINTS': 1000})
    def test_quadrature_budget(self):
        with self.assertRaises(QuadratureBudgetExceeded):
            kernel_identity_check(FOUR, 1, 3, 17, (0, 0, 0, 0))


class LowHighTests(SimpleTestCase):
    def test_full_width_at_origin(self):
        low, high = low_high_split(FOUR, 25, 0, 5.0, np.zeros(4))
        block = main_term_multiplier(FOUR, 25, np.zeros(4), normalize=False, moduli=[1])
        self.assertAlmostEqual(low, block)
        self.assertAlmostEqual(high, 0.0)

    def test_low_vanishes_off_widened_arcs(self):
        low, _ = low_high_split(FOUR, 64, 1, 4.0, (0.05, 0.0, 0.0, 0.0))
        self.assertEqual(low, 0)

    def test_regime(self):
        with self.assertRaises(RegimeViolation):
            low_high_split(FOUR, 25, 2, 2.0, np.zeros(4))
        with self.assertRaises(RegimeViolation):
            low_high_split(FOUR, 25, 0, 6.0, np.zeros(4))

    def test_high_envelope_constant(self):
        rng = np.random.default_rng(12)
        xi = rng.random((4000, 4)) - 0.5
        ratios = []
        for level in (49, 101):
            for j, delta in ((0, 2.0), (1, 4.0), (1, np.sqrt(level))):
                _, high = low_high_split(FOUR, level, j, delta, xi)
                ratios.append(np.abs(high).max() / high_envelope(4, level, j, delta))
        self.assertTrue(np.all(np.isfinite(ratios)))
        self.assertLess(max(ratios), 10.0)
