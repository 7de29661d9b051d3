from io import StringIO
from pathlib import Path
import csv
import json
import tempfile

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from lattice_shells.shells import DiagonalForm
from operators.grid import GridFunction
from spherelab.exceptions import ConfigError
from .config import build_config, load_manifest
from .reports import ResultWriter, format_value, read_table
from .selection import log_spaced, parse_levels

FOUR = DiagonalForm(4, 2)


def _rows(text):
    body = [line for line in text.splitlines() if line and not line.startswith('# ')]
    return list(csv.DictReader(body))


class LabCommandMixin:
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def lab(self, *args):
        out = StringIO()
        call_command('lab', *args, '--cache-dir', str(self.dir / 'cache'), stdout=out)
        return out.getvalue()


class SelectionTests(SimpleTestCase):
    def test_single_and_list(self):
        self.assertEqual(parse_levels('25', FOUR), [25])
        self.assertEqual(parse_levels('9, 1,5', FOUR), [1, 5, 9])

    def test_range_keeps_represented_levels(self):
        # 7 is not a sum of three squares but every level is a sum of four
        three = DiagonalForm(3, 2)
        self.assertNotIn(7, parse_levels('1..10', three))
        self.assertEqual(parse_levels('odd:1..9', FOUR), [1, 3, 5, 7, 9])

    def test_dyadic_block(self):
        self.assertEqual(parse_levels('dyadic:3:odd', FOUR), [9, 11, 13, 15])
        self.assertEqual(len(parse_levels('dyadic:3', FOUR)), 8)

    def test_thinning(self):
        levels = parse_levels('odd:49..401/6', FOUR)
        self.assertEqual(len(levels), 6)
        self.assertEqual((levels[0], levels[-1]), (49, 401))
        self.assertEqual(log_spaced([1, 2, 3], 5), [1, 2, 3])

    def test_bad_selection(self):
        for text in ('', '5..2', 'dyadic:x', 'twelve'):
            with self.assertRaises(ConfigError):
                parse_levels(text, FOUR)


class ConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def manifest(self, text):
        path = self.dir / 'manifest.json'
        path.write_text(text)
        return path

    def test_defaults_come_from_settings(self):
        config = build_config('shell', {'levels': '25'})
        self.assertEqual(config.max_cells, settings.LAB['MAX_CELLS'])
        self.assertEqual(config.tolerances['kernel_residual'], settings.LAB['TOLERANCES']['kernel_residual'])
        self.assertEqual(config.form, FOUR)

    def test_flags_override_manifest(self):
        path = self.manifest('{\n  "d": 5,\n  "lambda": [1, 2, 3],\n  "seed": 4\n}\n')
        config = build_config('shell', {'seed': 9}, manifest=path)
        self.assertEqual((config.d, config.levels, config.seed), (5, '1,2,3', 9))

    def test_form_block(self):
        path = self.manifest('{"form": {"d": 6, "k": 2}}')
        self.assertEqual(build_config('norm', manifest=path).d, 6)

    def test_unknown_key_reports_its_line(self):
        path = self.manifest('{\n  "d": 4,\n  "lambada": 25\n}\n')
        with self.assertRaises(ConfigError) as ctx:
            load_manifest(path)
        self.assertEqual(ctx.exception.line, 3)

    def test_invalid_value_reports_its_line(self):
        path = self.manifest('{\n  "seed": 1,\n  "d": "four"\n}\n')
        with self.assertRaises(ConfigError) as ctx:
            build_config('shell', manifest=path)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn('d:', str(ctx.exception))

    def test_broken_json_reports_its_line(self):
        path = self.manifest('{\n  "d": 4,\n  "k" 2\n}\n')
        with self.assertRaises(ConfigError) as ctx:
            load_manifest(path)
        self.assertEqual(ctx.exception.line, 3)

    def test_unknown_tolerance(self):
        with self.assertRaises(ConfigError):
            build_config('mult', {'tolerances': {'kernel': 1e-3}})

    def test_applied_swaps_budgets(self):
        config = build_config('avg', {'max_cells': 1234})
        before = settings.LAB
        with config.applied():
            self.assertEqual(settings.LAB['MAX_CELLS'], 1234)
        self.assertIs(settings.LAB, before)

    def test_echo_is_stable(self):
        first = build_config('norm', {'p': '3/2', 'levels': '5', 'output': 'a.csv'})
        second = build_config('norm', {'levels': '5', 'p': '3/2', 'output': 'b.csv', 'timings': True})
        self.assertEqual(first.echo(), second.echo())


class ReportWriterTests(SimpleTestCase):
    def test_format_value(self):
        self.assertEqual(format_value(0.1), '0.1')
        self.assertEqual(format_value(None), '')
        self.assertEqual(format_value(True), 'true')
        self.assertEqual(format_value([1, 2.5]), '1 2.5')

    def test_header_and_rows(self):
        out = StringIO()
        config = build_config('shell', {'levels': '25'})
        with ResultWriter(out, ('lambda', 'count'), config) as writer:
            writer.write({'lambda': 25, 'count': 248})
        lines = out.getvalue().splitlines()
        self.assertTrue(lines[0].startswith('# config: {'))
        self.assertTrue(lines[1].startswith('# generated_at: '))
        self.assertEqual(lines[2:], ['lambda,count', '25,248'])

    def test_read_table(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 't.csv'
            with ResultWriter(path, ('lambda', 'estimate'), build_config('norm', {'p': '3/2'})) as writer:
                writer.write([5, 0.5])
                writer.comment('fit', json.dumps({'slope': -0.5}))
            meta, rows = read_table(path)
        self.assertEqual(meta['config']['p'], '3/2')
        self.assertEqual(meta['fit']['slope'], -0.5)
        self.assertEqual(rows, [{'lambda': '5', 'estimate': '0.5'}])


class ShellCommandTests(LabCommandMixin, SimpleTestCase):
    def test_count_matches_jacobi(self):
        rows = _rows(self.lab('shell', '--d', '4', '--k', '2', '--lambda', '25', '--mode', 'count'))
        self.assertEqual(rows, [{'lambda': '25', 'count': '248', 'oracle': '248', 'match': 'true'}])

    def test_enumerate(self):
        rows = _rows(self.lab('shell', '--enumerate', '--lambda', '1'))
        self.assertEqual(len(rows), 8)
        self.assertEqual(set(rows[0]), {'lambda', 'y1', 'y2', 'y3', 'y4'})

    def test_output_is_deterministic(self):
        first, second = self.dir / 'a.csv', self.dir / 'b.csv'
        self.lab('shell', '--lambda', 'odd:1..31', '--output', str(first))
        self.lab('shell', '--lambda', 'odd:1..31', '--output', str(second))
        strip = lambda path: [line for line in path.read_text().splitlines() if not line.startswith('# generated_at')]
        self.assertEqual(strip(first), strip(second))

    def test_logs_to_the_lab_logger(self):
        with self.assertLogs('lab', level='INFO') as logs:
            self.lab('shell', '--lambda', '5')
        self.assertTrue(any('lab shell finished with status 0' in line for line in logs.output))
        self.assertIn('experiments_file', settings.LOGGING['loggers']['lab']['handlers'])

    def test_bad_selection_prints_json_error(self):
        out = StringIO()
        with self.assertLogs('lab', level='ERROR'):
            with self.assertRaises(CommandError) as ctx:
                call_command('lab', 'shell', '--lambda', '9..2', stdout=out)
        self.assertEqual(ctx.exception.returncode, 2)
        payload = json.loads(out.getvalue().strip().splitlines()[-1])
        self.assertEqual(payload['error'], 'config_error')
        self.assertEqual(payload['command'], 'shell')


class SumsCommandTests(LabCommandMixin, SimpleTestCase):
    def test_dual_check_passes(self):
        rows = _rows(self.lab('sums', '--kind', 'dual-check', '--samples', '5', '--q-max', '7', '--seed', '3'))
        self.assertEqual(len(rows), 5)
        for row in rows:
            self.assertLess(float(row['residual']), 1e-9)

    def test_ramanujan_rows(self):
        rows = _rows(self.lab('sums', '--kind', 'ramanujan', '--q', '6', '--lambda', '1,2,3'))
        self.assertEqual([float(row['real']) for row in rows], [1.0, -1.0, -2.0])


class AvgCommandTests(LabCommandMixin, SimpleTestCase):
    def test_average_of_a_delta(self):
        source = self.dir / 'delta.csv'
        GridFunction.delta(4).save(source)
        template = str(self.dir / 'out_{lambda}.csv')
        rows = _rows(self.lab('avg', '--input', str(source), '--lambda', '1,2', '--grid-out', template))
        self.assertEqual([row['lambda'] for row in rows], ['1', '2'])
        for row in rows:
            self.assertAlmostEqual(float(row['l1']), 1.0, places=12)
        self.assertTrue((self.dir / 'out_2.csv').exists())
        self.assertEqual(GridFunction.load(self.dir / 'out_1.csv').M, 3)

    def test_missing_input(self):
        with self.assertRaises(CommandError):
            self.lab('avg', '--lambda', '1')


class MultCommandTests(LabCommandMixin, SimpleTestCase):
    def test_kernel_check_exits_zero(self):
        rows = _rows(self.lab('mult', '--kernel-check', '--q', '2', '--a', '1', '--lambda', '16', '--x', '1,0,2,0'))
        self.assertEqual(len(rows), 1)
        self.assertLessEqual(float(rows[0]['residual']), 1e-6)

    def test_kernel_check_reports_imaginary_parts(self):
        row = _rows(self.lab('mult', '--kernel-check', '--q', '4', '--a', '1', '--lambda', '16', '--x', '1,0,0,0'))[0]
        left = complex(float(row['left']), float(row['left_imag']))
        right = complex(float(row['right']), float(row['right_imag']))
        self.assertGreater(abs(right.imag), abs(right.real))
        self.assertAlmostEqual(abs(left - right), float(row['residual']), places=12)

    def test_exact_multiplier_at_zero(self):
        rows = _rows(self.lab('mult', '--main', '--lambda', '25', '--xi', '0,0,0,0'))
        self.assertAlmostEqual(float(rows[0]['exact']), 1.0, places=12)
        self.assertEqual(rows[0]['cutoff'], '32')


class NormCommandTests(LabCommandMixin, SimpleTestCase):
    def test_estimates_and_fit_line(self):
        output = self.dir / 'norm.csv'
        self.lab('norm', '--p', '3/2', '--lambda', '1,3,5,7,9', '--method', 'probe', '--output', str(output))
        meta, rows = read_table(output)
        self.assertEqual([row['lambda'] for row in rows], ['1', '3', '5', '7', '9'])
        self.assertEqual({row['seconds'] for row in rows}, {''})
        self.assertEqual(meta['fit']['points'], 5)
        self.assertLess(meta['fit']['slope'], 0)

    def test_calc(self):
        rows = {row['name']: row for row in _rows(self.lab('norm', '--calc', '--d', '5', '--p', '3/2'))}
        self.assertEqual(rows['critical_p']['exact'], '3/2')

    def test_report_over_a_norm_table(self):
        table, report = self.dir / 'norm.csv', self.dir / 'report.csv'
        self.lab('norm', '--p', '3/2', '--lambda', '1,3,5,7,9', '--output', str(table))
        self.lab('report', '--inputs', str(table), '--output', str(report))
        _, rows = read_table(report)
        self.assertEqual(rows[0]['command'], 'norm')
        self.assertLess(float(rows[0]['fitted_slope']), 0)
        self.assertEqual(rows[0]['predicted_trivial'], '-1/3')
