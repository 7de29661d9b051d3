from math import gcd

import numpy as np
from django.test import SimpleTestCase, override_settings
from django.conf import settings

from lattice_shells.shells import DiagonalForm
from spherelab.exceptions import InvalidForm
from .scans import dual_identity_check, gauss_bound_scan, growth_exponent, weil_ratio_scan
from .serializers import SumValueSerializer, WeilRowSerializer
from .sums import (
    RationalPoint, e, gauss_sum, kloosterman, kloosterman_batch, kloosterman_value,
    ramanujan, ramanujan_direct, units,
)

TOL = settings.LAB['TOLERANCES']


def residue_box(q, d):
    return np.indices((q,) * d).reshape(d, -1).T


def direct_gauss(form, a, q, m):
    b = residue_box(q, form.d)
    phase = (a * form(b) + b @ np.asarray(m)) % q
    return complex(np.mean(e(phase / q)))


def direct_kloosterman(form, q, level, m):
    return sum(e(-a * level / q) * direct_gauss(form, a, q, m) for a in units(q))


class RamanujanTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(ramanujan(1, 7), 1)
        self.assertEqual(ramanujan(6, 0), 2)
        self.assertEqual(ramanujan(4, 2), -2)

    def test_closed_form_matches_unit_sum(self):
        for q in range(1, 501):
            for n in list(range(-10, 11)) + [q, 2 * q]:
                direct = ramanujan_direct(q, n)
                self.assertLessEqual(abs(direct.imag), TOL['imag_part'])
                self.assertAlmostEqual(direct.real, ramanujan(q, n), delta=1e-9 * q)

    def test_bounded_by_modulus(self):
        for q in range(2, 300):
            for n in range(-20, 21):
                self.assertLess(abs(ramanujan(q, n)), q)


class GaussSumTests(SimpleTestCase):
    def test_trivial_modulus(self):
        self.assertEqual(gauss_sum(DiagonalForm(4, 2), 0, 1, (0, 0, 0, 0)), 1)

    def test_vanishing_binary_sum(self):
        # d = 1 is not a lattice form, so use the 1-D factor through d=2 with one coordinate
        value = gauss_sum(DiagonalForm(2, 2), 1, 2, (0, 1))
        self.assertAlmostEqual(abs(value), 0.0, places=12)

    def test_factored_matches_direct(self):
        rng = np.random.default_rng(7)
        for d in (2, 3, 4):
            for k in (2, 3):
                form = DiagonalForm(d, k)
                for q in range(1, 13):
                    for a in units(q)[:3]:
                        m = rng.integers(0, q, size=d)
                        self.assertLess(abs(gauss_sum(form, a, q, m) - direct_gauss(form, a, q, m)), TOL['sum_oracle'])

    def test_four_dimensional_mod_three(self):
        form = DiagonalForm(4, 2)
        self.assertLess(abs(gauss_sum(form, 1, 3, (0, 0, 0, 0)) - direct_gauss(form, 1, 3, (0, 0, 0, 0))), 1e-12)

    def test_magnitude_at_most_one(self):
        form = DiagonalForm(3, 3)
        for q in range(1, 30):
            for a in units(q):
                self.assertLessEqual(abs(gauss_sum(form, a, q, (1, 2, 3))), 1 + 1e-12)


class KloostermanTests(SimpleTestCase):
    def test_trivial_modulus(self):
        self.assertAlmostEqual(kloosterman(DiagonalForm(4, 2), 1, 17), 1)

    def test_examples(self):
        form = DiagonalForm(4, 2)
        zero = (0, 0, 0, 0)
        self.assertLess(abs(kloosterman(form, 5, 3, zero) - direct_kloosterman(form, 5, 3, zero)), TOL['sum_oracle'])
        self.assertAlmostEqual(abs(kloosterman(form, 2, 1, zero)), 0.0, places=12)

    def test_matches_double_sum(self):
        form = DiagonalForm(2, 2)
        rng = np.random.default_rng(11)
        for q in range(1, 51):
            m = rng.integers(0, q, size=2)
            level = int(rng.integers(0, 200))
            self.assertLess(abs(kloosterman(form, q, level, m) - direct_kloosterman(form, q, level, m)), TOL['sum_oracle'])

    def test_real_at_zero_frequency_and_even(self):
        form = DiagonalForm(4, 2)
        for q in range(1, 40):
            self.assertLessEqual(abs(kloosterman(form, q, 13).imag), TOL['imag_part'])
            m = np.array([1, 2, 0, 3])
            self.assertLess(abs(kloosterman(form, q, 13, m) - kloosterman(form, q, 13, -m)), 1e-10)

    def test_batch_matches_single(self):
        form = DiagonalForm(4, 2)
        ms = np.array([[0, 0, 0, 0], [1, 0, 2, 3], [4, 4, 1, 0]])
        batch = kloosterman_batch(form, 7, 25, ms)
        for row, value in zip(ms, batch):
            self.assertAlmostEqual(value, kloosterman(form, 7, 25, row))

    def test_bounded_by_modulus(self):
        form = DiagonalForm(4, 2)
        for q in range(1, 60):
            self.assertLessEqual(abs(kloosterman(form, q, 9, (1, 1, 0, 0))), q)


class ScanTests(SimpleTestCase):
    def test_weil_first_row(self):
        scan = weil_ratio_scan(DiagonalForm(5, 2), 1, 10)
        self.assertEqual(scan.rows[0].ratio, 1.0)

    def test_weil_growth_is_small(self):
        scan = weil_ratio_scan(DiagonalForm(5, 2), 100, 10)
        self.assertTrue(np.isfinite(scan.max_ratio))
        self.assertLess(scan.growth, 0.25)

    def test_weil_prime_level(self):
        scan = weil_ratio_scan(DiagonalForm(4, 2), 7, 7)
        self.assertEqual(scan.rows[-1].gcd, 7)
        self.assertTrue(np.isfinite(scan.rows[-1].ratio))

    @override_settings(LAB={**settings.LAB, 'WORKERS': 4})
    def test_parallel_scan_keeps_order(self):
        rows = weil_ratio_scan(DiagonalForm(4, 2), 30, 5).rows
        self.assertEqual([row.q for row in rows], list(range(1, 31)))

    def test_weil_requires_quadratic(self):
        with self.assertRaises(InvalidForm):
            weil_ratio_scan(DiagonalForm(4, 3), 5, 1)

    def test_growth_of_constant_is_zero(self):
        self.assertAlmostEqual(growth_exponent([1, 2, 3, 4], [1, 1, 1, 1]), 0.0)

    def test_dual_identity_examples(self):
        form = DiagonalForm(4, 2)
        self.assertLess(dual_identity_check(form, 0, 1, (3, 1, 4, 1)), 1e-12)
        self.assertLess(dual_identity_check(form, 1, 3, (1, 0, 2, 0)), 1e-10)
        self.assertLess(dual_identity_check(form, 2, 5, (0, 0, 0, 0)), 1e-10)

    def test_dual_identity_random(self):
        rng = np.random.default_rng(3)
        form = DiagonalForm(4, 2)
        checked = 0
        while checked < 100:
            q = int(rng.integers(1, 51))
            a = int(rng.integers(0, q))
            if gcd(a, q) != 1:
                continue
            x = rng.integers(-60, 61, size=4)
            self.assertLessEqual(dual_identity_check(form, a, q, x), TOL['dual_residual'])
            checked += 1

    def test_gauss_bound_constant(self):
        scan = gauss_bound_scan(DiagonalForm(4, 2), 60, 'gauss')
        self.assertLessEqual(scan.constant, 4 + 1e-9)

    def test_steckin_bound_constant(self):
        form = DiagonalForm(4, 3)
        scan = gauss_bound_scan(form, 200, 'steckin')
        self.assertLess(scan.constant ** (1 / form.d), 8)

    def test_weyl_exponent(self):
        self.assertEqual(gauss_bound_scan(DiagonalForm(8, 3), 5, 'weyl').exponent, 1.0)


class RationalPointTests(SimpleTestCase):
    def test_reduction(self):
        point = RationalPoint(7, 5)
        self.assertEqual(point.a, 2)
        self.assertTrue(point.is_reduced)
        self.assertFalse(RationalPoint(2, 4).is_reduced)

    def test_major_arc_center(self):
        np.testing.assert_array_equal(RationalPoint.major_arc_center((0.5, 0.0, 0.01, 0.0), 2), [1, 0, 0, 0])
        self.assertIsNone(RationalPoint.major_arc_center((0.3, 0.0), 2))

    def test_major_arc_centers_for_a_stack(self):
        xi = np.array([[0.5, 0.0], [0.3, 0.0], [0.45, -0.49]])
        m, near = RationalPoint.major_arc_centers(xi, 2)
        np.testing.assert_array_equal(near, [True, False, True])
        np.testing.assert_array_equal(m[near], [[1, 0], [1, -1]])


class SerializerTests(SimpleTestCase):
    def test_weil_row_columns(self):
        row = weil_ratio_scan(DiagonalForm(4, 2), 2, 1).rows[0]
        self.assertEqual(list(WeilRowSerializer(row).data), ['q', 'ratio', 'gcd', 'abs_value'])

    def test_sum_value(self):
        data = SumValueSerializer(kloosterman_value(DiagonalForm(4, 2), 1, 3)).data
        self.assertEqual(data['lambda'], 3)
        self.assertAlmostEqual(data['real'], 1.0)
