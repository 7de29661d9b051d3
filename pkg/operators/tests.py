import tempfile
from pathlib import Path
from unittest import skipUnless

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from lattice_shells.shells import DiagonalForm, count_shell
from spherelab.exceptions import BoxTooLarge, GridFormatError, InvalidExponent
from .averages import (
    ArithmeticMeasure, ConvolutionPlan, average, average_auto, average_fft, average_support,
    dyadic_levels, lp_norm, maximal, sigma_hat,
)
from .grid import GridFunction

TOL = settings.LAB['TOLERANCES']
SLOW = settings.LAB['RUN_SLOW_TESTS']
FOUR = DiagonalForm(4, 2)
FIVE = DiagonalForm(5, 2)
EXPONENTS = (1, 4 / 3, 2, 4, np.inf)


def measure(form, level):
    return ArithmeticMeasure.for_level(form, level)


class GridFunctionTests(SimpleTestCase):
    def test_rejects_non_cubes_and_nan(self):
        with self.assertRaises(GridFormatError):
            GridFunction(np.zeros((3, 4)))
        with self.assertRaises(GridFormatError):
            GridFunction(np.array([[np.nan]]))

    def test_ball(self):
        ball = GridFunction.ball(4, 1)
        self.assertEqual(ball.M, 3)
        self.assertEqual(int(ball.values.sum()), 9)
        np.testing.assert_array_equal(ball.offset, [-1, -1, -1, -1])

    def test_indicator_and_value_at(self):
        grid = GridFunction.indicator([(1, 2), (3, 2)])
        self.assertEqual(grid.value_at((3, 2)), 1.0)
        self.assertEqual(grid.value_at((2, 2)), 0.0)
        self.assertEqual(grid.value_at((10, 10)), 0.0)

    def test_crop_and_embed(self):
        grid = GridFunction.random(3, 4, rng=1)
        embedded = grid.embed(8, grid.offset - 2)
        back = embedded.crop(4, grid.offset)
        np.testing.assert_array_equal(back.values, grid.values)

    def test_csv_and_raw_files(self):
        grid = GridFunction.random(2, 5, rng=2, complex_values=True)
        real = GridFunction.random(3, 3, rng=3)
        with tempfile.TemporaryDirectory() as tmp:
            for fmt in ('csv', 'raw'):
                for g in (grid, real):
                    path = g.save(Path(tmp) / f"g.{fmt}", fmt=fmt)
                    loaded = GridFunction.load(path)
                    np.testing.assert_array_equal(loaded.values, g.values)
                    np.testing.assert_array_equal(loaded.offset, g.offset)

    def test_header(self):
        grid = GridFunction.zeros(2, 3, offset=(-1, 4))
        self.assertEqual(grid.header(), 'grid d=2 M=3 offset=-1,4 dtype=float64 format=csv')

    def test_bad_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bad.csv'
            path.write_text('grid d=2 M=2 offset=0,0 dtype=float64 format=csv\n1\n2\n3\n')
            with self.assertRaises(GridFormatError):
                GridFunction.load(path)


class ArithmeticMeasureTests(SimpleTestCase):
    def test_probability(self):
        mu = measure(FOUR, 25)
        self.assertAlmostEqual(mu.rasterize(40).sum(), 1.0, places=14)
        self.assertEqual(mu.count * mu.weight, 1.0)

    def test_aliasing_adds_up(self):
        mu = measure(FOUR, 1)
        grid = mu.rasterize(2)
        self.assertAlmostEqual(grid[0, 0, 0, 0], 0.0)
        self.assertAlmostEqual(grid.sum(), 1.0)
        self.assertAlmostEqual(grid[1, 0, 0, 0], 0.25)

    def test_unrepresented_level(self):
        with self.assertRaises(ValueError):
            measure(DiagonalForm(2, 2), 3)


class AverageTests(SimpleTestCase):
    def test_delta_example(self):
        out = average(GridFunction.delta(4), measure(FOUR, 1))
        self.assertEqual(out.M, 3)
        self.assertAlmostEqual(out.values.sum(), 1.0)
        for axis in range(4):
            for sign in (-1, 1):
                x = np.zeros(4, dtype=int)
                x[axis] = sign
                self.assertEqual(out.value_at(x), 1 / 8)
        self.assertEqual(out.value_at((0, 0, 0, 0)), 0.0)
        self.assertEqual(np.count_nonzero(out.values), 8)

    def test_constant_on_torus(self):
        f = GridFunction(np.full((6,) * 4, 2.5))
        for level in (1, 5, 13):
            np.testing.assert_allclose(average(f, measure(FOUR, level), torus=True).values, 2.5, rtol=1e-14)
            np.testing.assert_allclose(average_fft(f, measure(FOUR, level), torus=True).values, 2.5, rtol=1e-12)

    def test_sparse_matches_fft(self):
        rng = np.random.default_rng(5)
        f = GridFunction.random(4, 9, rng=rng, nonnegative=False)
        mu = measure(FOUR, 5)
        diff = np.abs(average(f, mu).values - average_fft(f, mu).values).max()
        self.assertLessEqual(diff, TOL['sparse_dense'])

    def test_sparse_matches_fft_random_cases(self):
        rng = np.random.default_rng(17)
        cases, side_max = (50, 33) if SLOW else (12, 9)
        for _ in range(cases):
            level = int(rng.integers(1, 51))
            side = int(rng.integers(1, side_max + 1))
            f = GridFunction.random(4, side, rng=rng, nonnegative=False)
            if rng.random() < 0.5:
                f.values[rng.random(f.values.shape) < 0.9] = 0.0
            mu = measure(FOUR, level)
            diff = np.abs(average(f, mu).values - average_fft(f, mu).values).max()
            self.assertLessEqual(diff, TOL['sparse_dense'], (level, side))

    def test_complex_input(self):
        f = GridFunction.random(3, 5, rng=8, complex_values=True)
        mu = measure(DiagonalForm(3, 2), 6)
        np.testing.assert_allclose(average(f, mu).values, average_fft(f, mu).values, atol=1e-12)

    def test_parallel_average_is_identical(self):
        f = GridFunction.random(4, 7, rng=9)
        mu = measure(FOUR, 50)
        serial = average(f, mu).values
        with override_settings(LAB={**settings.LAB, 'WORKERS': 3}):
            parallel = average(f, mu).values
        np.testing.assert_array_equal(serial, parallel)

    def test_mass_and_positivity(self):
        f = GridFunction.random(4, 5, rng=10)
        out = average(f, measure(FOUR, 13))
        self.assertTrue(np.all(out.values >= 0))
        self.assertAlmostEqual(out.values.sum(), f.values.sum(), places=10)

    def test_support_path_matches_box(self):
        f = GridFunction.indicator([(0, 0, 0, 0), (2, 1, 0, 0), (3, -1, 2, 0)])
        mu = measure(FOUR, 9)
        coordinates, values = average_support(f, mu)
        box = average(f, mu)
        for x, v in zip(coordinates, values):
            self.assertAlmostEqual(box.value_at(x), v)
        self.assertAlmostEqual(values.sum(), 3.0)

    @override_settings(LAB={**settings.LAB, 'MAX_CELLS': 1000})
    def test_box_budget(self):
        with self.assertRaises(BoxTooLarge):
            average(GridFunction.delta(4), measure(FOUR, 25))

    def test_auto_picks_either_path_consistently(self):
        f = GridFunction.random(4, 6, rng=4)
        mu = measure(FOUR, 9)
        np.testing.assert_allclose(average_auto(f, mu).values, average(f, mu).values, atol=1e-12)


class AverageFftTests(SimpleTestCase):
    def test_delta_reproduces_measure(self):
        mu = measure(FOUR, 9)
        out = average_fft(GridFunction.delta(4), mu)
        expected = np.zeros_like(out.values)
        r = mu.radius
        expected[tuple((mu.points + r).T)] = 1 / mu.count
        self.assertLessEqual(np.abs(out.values - expected).max(), 1e-12)

    def test_ball_has_height(self):
        out = average_fft(GridFunction.ball(4, 5), measure(FOUR, 25))
        self.assertGreaterEqual(out.values.max(), 0.5)

    def test_linearity(self):
        rng = np.random.default_rng(6)
        f = GridFunction.random(4, 7, rng=rng)
        g = GridFunction(rng.standard_normal(f.values.shape), f.offset)
        mu = measure(FOUR, 13)
        left = average_fft(f + g, mu).values
        right = average_fft(f, mu).values + average_fft(g, mu).values
        self.assertLessEqual(np.abs(left - right).max(), 1e-9)

    def test_wrapping_box_rejected(self):
        with self.assertRaises(ValueError):
            average_fft(GridFunction.delta(4), measure(FOUR, 9), M=4)

    def test_plan_reuse(self):
        mu = measure(FOUR, 5)
        plan = ConvolutionPlan(mu, 11)
        f = GridFunction.random(4, 7, rng=12)
        np.testing.assert_allclose(average_fft(f, mu, plan=plan).values, average(f, mu).values, atol=1e-12)


class MaximalTests(SimpleTestCase):
    def test_single_level(self):
        f = GridFunction.random(4, 5, rng=13, nonnegative=False)
        mu = measure(FOUR, 9)
        np.testing.assert_allclose(maximal(f, [mu]).values, np.abs(average(f, mu).values), atol=1e-12)

    def test_delta_over_dyadic_block(self):
        levels = dyadic_levels(FOUR, 8, odd_only=True)
        self.assertEqual(levels, [9, 11, 13, 15])
        out = maximal(GridFunction.delta(4), levels, form=FOUR)
        for index in np.ndindex(out.values.shape):
            x = np.asarray(index) + out.offset
            norm = int((x ** 2).sum())
            expected = 1 / count_shell(FOUR, norm) if norm in levels else 0.0
            self.assertAlmostEqual(out.values[index], expected, places=12)

    def test_bounded_by_sum_and_monotone(self):
        f = GridFunction.random(4, 4, rng=14)
        levels = dyadic_levels(FOUR, 4)
        sup = maximal(f, levels, form=FOUR)
        total = np.zeros_like(sup.values)
        for level in levels:
            total += average(f, measure(FOUR, level)).embed(sup.M, sup.offset).values
        self.assertTrue(np.all(sup.values <= total + 1e-12))
        smaller = maximal(f, levels[:2], form=FOUR).crop(sup.M, sup.offset)
        self.assertTrue(np.all(smaller.values <= sup.values + 1e-12))

    def test_needs_levels(self):
        with self.assertRaises(ValueError):
            maximal(GridFunction.delta(4), [], form=FOUR)


class NormTests(SimpleTestCase):
    def test_delta(self):
        for p in EXPONENTS:
            self.assertEqual(lp_norm(GridFunction.delta(3), p), 1.0)

    def test_indicator(self):
        f = GridFunction.indicator([(0, 0), (1, 1), (2, 0), (0, 2)])
        for p in (1, 2, 3.5):
            self.assertAlmostEqual(lp_norm(f, p), 4 ** (1 / p))

    def test_nesting(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            f = GridFunction.random(3, 4, rng=rng, nonnegative=False)
            norms = [lp_norm(f, p) for p in EXPONENTS]
            for smaller, larger in zip(norms[1:], norms[:-1]):
                self.assertLessEqual(smaller, larger + 1e-12)

    def test_rejects_small_exponent(self):
        with self.assertRaises(InvalidExponent):
            lp_norm(GridFunction.delta(2), 0.5)


class SigmaHatTests(SimpleTestCase):
    def test_zero_frequency(self):
        self.assertAlmostEqual(sigma_hat(measure(FOUR, 25), np.zeros(4)), 1.0)

    def test_real_everywhere(self):
        rng = np.random.default_rng(16)
        values = sigma_hat(measure(FOUR, 13), rng.random((200, 4)) - 0.5)
        self.assertLessEqual(np.abs(values.imag).max(), 1e-10)

    def test_half_frequency(self):
        self.assertAlmostEqual(sigma_hat(measure(FOUR, 1), (0.5, 0, 0, 0)), 0.5)

    def test_matches_transform_of_average(self):
        mu = measure(FOUR, 2)
        out = average(GridFunction.delta(4), mu)
        xi = np.array([0.1, -0.2, 0.3, 0.05])
        coords = np.argwhere(out.values) + out.offset
        direct = np.sum(out.values[out.values != 0] * np.exp(2j * np.pi * coords @ xi))
        self.assertAlmostEqual(sigma_hat(mu, xi), direct)


class OperatorInequalityTests(SimpleTestCase):
    """Contraction, ℓ¹→ℓ^∞ and the delta identity."""

    def test_contraction_and_young(self):
        rng = np.random.default_rng(20)
        trials = 100
        for level in (5, 13, 25):
            mu = measure(FOUR, level)
            for _ in range(trials):
                f = GridFunction.random(4, 9, rng=rng)
                out = average(f, mu)
                for p in EXPONENTS:
                    self.assertLessEqual(lp_norm(out, p), lp_norm(f, p) + 1e-12)
                self.assertLessEqual(lp_norm(out, np.inf), lp_norm(f, 1) / mu.count + 1e-12)

    def test_delta_identity(self):
        for level in (1, 25, 101):
            mu = measure(FOUR, level)
            out = average(GridFunction.delta(4), mu)
            for p, q in ((1, np.inf), (1.5, 3), (5 / 3, 2.5), (2, 2)):
                expected = mu.count ** (1 / q - 1)
                self.assertAlmostEqual(lp_norm(out, q) / lp_norm(GridFunction.delta(4), p), expected, delta=1e-12)

    def test_trivial_bound_five_dimensions(self):
        rng = np.random.default_rng(21)
        levels = range(1, 501) if SLOW else (1, 2, 7, 50, 137, 500)
        trials = 100
        for level in levels:
            mu = measure(FIVE, level)
            for _ in range(trials):
                points = rng.integers(-3, 4, size=(6, 5))
                f = GridFunction.indicator(points)
                f.values[f.values > 0] = rng.random(int(f.values.sum())) + 0.1
                _, values = average_support(f, mu)
                for p in (1, 1.5, 2):
                    dual = np.inf if p == 1 else p / (p - 1)
                    bound = 100 * level ** (-1.5 * (2 / p - 1))
                    self.assertLessEqual(lp_norm(values, dual), bound * lp_norm(f, p), (level, p))
