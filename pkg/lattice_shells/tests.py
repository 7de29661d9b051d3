from itertools import product
import tempfile

import numpy as np
from django.test import SimpleTestCase

from spherelab.exceptions import InvalidForm, ShellBudgetExceeded
from .cache import ShellCache
from .serializers import RegularValueSerializer, ShellSerializer
from .shells import (
    DiagonalForm, count_shell, count_table, enumerate_shell, four_square_count,
    regular_values, within_count_bound,
)


def brute_force(form, level):
    radius = form.radius(level)
    axis = range(-radius, radius + 1)
    return sorted(y for y in product(axis, repeat=form.d) if form.value(y) == level)


class DiagonalFormTests(SimpleTestCase):
    def test_rejects_small_dimension_and_degree(self):
        with self.assertRaises(InvalidForm):
            DiagonalForm(1, 2)
        with self.assertRaises(InvalidForm):
            DiagonalForm(4, 1)

    def test_birch_threshold(self):
        self.assertTrue(DiagonalForm(5, 2).satisfies_birch)
        self.assertFalse(DiagonalForm(4, 2).satisfies_birch)
        self.assertTrue(DiagonalForm(33, 3).satisfies_birch)
        self.assertFalse(DiagonalForm(16, 3).satisfies_birch)

    def test_evaluates_on_arrays(self):
        form = DiagonalForm(4, 2)
        np.testing.assert_array_equal(form(np.array([[1, 0, 2, 0], [1, 1, 1, 1]])), [5, 4])


class EnumerateShellTests(SimpleTestCase):
    def test_origin(self):
        shell = enumerate_shell(DiagonalForm(4, 2), 0)
        self.assertEqual(shell.count, 1)
        np.testing.assert_array_equal(shell.points, [[0, 0, 0, 0]])

    def test_unit_vectors(self):
        shell = enumerate_shell(DiagonalForm(4, 2), 1)
        self.assertEqual(shell.count, 8)
        self.assertEqual(sorted(np.abs(shell.points).sum(axis=1).tolist()), [1] * 8)

    def test_five_dimensional_level_two(self):
        self.assertEqual(enumerate_shell(DiagonalForm(5, 2), 2).count, 40)

    def test_matches_brute_force(self):
        for form, top in ((DiagonalForm(4, 2), 30), (DiagonalForm(3, 3), 40), (DiagonalForm(5, 2), 9)):
            for level in range(top + 1):
                shell = enumerate_shell(form, level)
                self.assertEqual([tuple(row) for row in shell.points.tolist()], brute_force(form, level))

    def test_points_distinct_lexicographic_and_on_shell(self):
        form = DiagonalForm(4, 2)
        shell = enumerate_shell(form, 50)
        rows = [tuple(row) for row in shell.points.tolist()]
        self.assertEqual(rows, sorted(set(rows)))
        self.assertTrue(np.all(form(shell.points) == 50))

    def test_symmetry(self):
        for level in (3, 25, 26):
            self.assertTrue(enumerate_shell(DiagonalForm(4, 2), level).is_symmetric())
        self.assertTrue(enumerate_shell(DiagonalForm(4, 4), 17).is_symmetric())

    def test_budget_reports_count(self):
        with self.assertRaises(ShellBudgetExceeded) as ctx:
            enumerate_shell(DiagonalForm(4, 2), 25, max_points=10)
        self.assertEqual(ctx.exception.detail['count'], count_shell(DiagonalForm(4, 2), 25))


class CountShellTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(count_shell(DiagonalForm(4, 2), 1), 8)
        self.assertEqual(count_shell(DiagonalForm(4, 2), 3), 32)
        self.assertEqual(count_shell(DiagonalForm(4, 4), 2), 24)

    def test_matches_enumeration(self):
        form = DiagonalForm(4, 2)
        table = count_table(form, 200)
        for level in range(201):
            self.assertEqual(int(table[level]), len(enumerate_shell(form, level).points))

    def test_jacobi_for_odd_levels(self):
        table = count_table(DiagonalForm(4, 2), 5000)
        for level in range(1, 5001, 2):
            self.assertEqual(int(table[level]), four_square_count(level), level)

    def test_jacobi_even_levels(self):
        table = count_table(DiagonalForm(4, 2), 400)
        for level in range(2, 401, 2):
            self.assertEqual(int(table[level]), four_square_count(level), level)

    def test_wide_counts_are_exact(self):
        form = DiagonalForm(40, 2)
        self.assertEqual(count_shell(form, 1), 80)
        self.assertEqual(count_shell(form, 2), 40 * 39 // 2 * 4)
        self.assertIsInstance(count_shell(form, 2), int)


class RegularValueTests(SimpleTestCase):
    def test_four_squares_represent_everything(self):
        values = dict((v.level, v.count) for v in regular_values(DiagonalForm(4, 2), 8))
        self.assertEqual(sorted(values), list(range(1, 9)))
        self.assertEqual(values[7], 64)

    def test_two_squares_skip_three(self):
        levels = [v.level for v in regular_values(DiagonalForm(2, 2), 3)]
        self.assertEqual(levels, [1, 2])

    def test_count_bound_five_dimensions(self):
        values = regular_values(DiagonalForm(5, 2), 2000)
        self.assertEqual(len(values), 2000)
        self.assertTrue(all(v.within_bound for v in values))

    def test_count_bound_four_dimensions_odd(self):
        values = regular_values(DiagonalForm(4, 2), 2000)
        odd = [v for v in values if v.level % 2]
        self.assertTrue(all(v.within_bound for v in odd))
        self.assertTrue(all(v.within_bound is None for v in values if v.level % 2 == 0))

    def test_bound_is_exact_integer_check(self):
        form = DiagonalForm(5, 2)
        # λ^{3/2}/100 at λ=100 is exactly 10
        self.assertTrue(within_count_bound(form, 100, 10))
        self.assertFalse(within_count_bound(form, 100, 9))


class ShellCacheTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.cache = ShellCache(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_file_format(self):
        form = DiagonalForm(4, 2)
        path = self.cache.store(enumerate_shell(form, 1))
        self.assertEqual(path.name, 'shell_d4_k2_l1.txt')
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'form d=4 k=2 lambda=1 count=8')
        self.assertEqual(lines[1], '-1 0 0 0')
        self.assertEqual(len(lines), 9)

    def test_hits_match_cold_runs(self):
        form = DiagonalForm(4, 2)
        cold = self.cache.shell(form, 25)
        warm = self.cache.shell(form, 25)
        self.assertEqual((self.cache.hits, self.cache.misses), (1, 1))
        np.testing.assert_array_equal(cold.points, warm.points)
        self.assertEqual(cold.count, warm.count)

    def test_count_only_entry_is_upgraded(self):
        form = DiagonalForm(4, 2)
        self.assertEqual(self.cache.count(form, 9), 104)
        self.assertIsNone(self.cache.load(form, 9, full=True))
        self.assertEqual(self.cache.shell(form, 9).count, 104)
        self.assertTrue(self.cache.load(form, 9).is_full)

    def test_corrupt_entry_is_a_miss(self):
        form = DiagonalForm(4, 2)
        self.cache.directory.mkdir(parents=True, exist_ok=True)
        self.cache.path(form, 5).write_text('garbage\n')
        self.assertIsNone(self.cache.load(form, 5))
        self.assertEqual(self.cache.clear(), 1)


class SerializerTests(SimpleTestCase):
    def test_shell_record(self):
        data = ShellSerializer(enumerate_shell(DiagonalForm(4, 2), 1)).data
        self.assertEqual(data, {'d': 4, 'k': 2, 'lambda': 1, 'count': 8, 'full': True})

    def test_regular_value_record(self):
        data = RegularValueSerializer(regular_values(DiagonalForm(4, 2), 1)[0]).data
        self.assertEqual(data['lambda'], 1)
        self.assertTrue(data['within_bound'])
        data = RegularValueSerializer(regular_values(DiagonalForm(4, 2), 2)[1]).data
        self.assertIsNone(data['within_bound'])
