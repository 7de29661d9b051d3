import argparse
import json
import logging

from django.core.management.base import BaseCommand, CommandError

from lab.config import build_config
from lab.runner import run
from spherelab.exceptions import ConfigError, LabError

logger = logging.getLogger('lab')

# BaseCommand options that are not part of an experiment
DJANGO_OPTIONS = {
    'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color', 'skip_checks',
    'subcommand', 'config', 'stdout', 'stderr',
}


def _tolerances(values):
    out = {}
    for item in values or ():
        key, sep, value = item.partition('=')
        if not sep:
            raise ConfigError(f"--tolerance expects KEY=VALUE, got {item!r}", field='tolerances')
        out[key.strip()] = value.strip()
    return out


class Command(BaseCommand):
    help = 'Run a spherical-averages experiment and write its result table.'

    def add_arguments(self, parser):
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--d', type=int, help='dimension')
        common.add_argument('--k', type=int, help='degree of the diagonal form')
        common.add_argument('--lambda', dest='levels', help='25 | 1,5,9 | odd:49..401/8 | dyadic:5:odd')
        common.add_argument('--seed', type=int)
        common.add_argument('--output', help='result file (default stdout)')
        common.add_argument('--config', help='JSON manifest; flags override it')
        common.add_argument('--cache-dir', dest='cache_dir')
        common.add_argument('--max-cells', '--box-cap', dest='max_cells', type=int)
        common.add_argument('--max-shell-points', dest='max_shell_points', type=int)
        common.add_argument('--quadrature-points', dest='quadrature_points', type=int)
        common.add_argument('--sample-budget', dest='sample_budget', type=int)
        common.add_argument('--workers', type=int)
        common.add_argument('--tolerance', dest='tolerances', action='append', metavar='KEY=VALUE')
        common.add_argument('--timings', action='store_true', help='fill the seconds column')

        commands = parser.add_subparsers(dest='subcommand', required=True)

        shell = commands.add_parser('shell', parents=[common], help='count or list shell points')
        modes = shell.add_mutually_exclusive_group()
        modes.add_argument('--count', dest='mode', action='store_const', const='count')
        modes.add_argument('--enumerate', dest='mode', action='store_const', const='enumerate')
        modes.add_argument('--regular', dest='mode', action='store_const', const='regular')
        modes.add_argument('--mode', choices=['count', 'enumerate', 'regular'])
        shell.add_argument('--lambda-max', dest='lambda_max', type=int)

        sums = commands.add_parser('sums', parents=[common], help='Gauss, Kloosterman and Ramanujan sums')
        sums.add_argument('--kind', choices=['ramanujan', 'gauss', 'kloosterman', 'weil-scan', 'dual-check', 'bound-scan'])
        sums.add_argument('--bound-scan', dest='kind', action='store_const', const='bound-scan')
        sums.add_argument('--q', dest='moduli', help='moduli, comma-separated')
        sums.add_argument('--q-max', dest='q_max', type=int)
        sums.add_argument('--a')
        sums.add_argument('--m', help='frequency, comma-separated')
        sums.add_argument('--x', help='lattice point for the dual check')
        sums.add_argument('--samples', type=int)
        sums.add_argument('--variant', choices=['gauss', 'weyl', 'steckin'])

        avg = commands.add_parser('avg', parents=[common], help='apply A_lambda to a grid file')
        avg.add_argument('--input')
        avg.add_argument('--path', choices=['auto', 'sparse', 'fft'])
        avg.add_argument('--format', choices=['csv', 'raw'])
        avg.add_argument('--grid-out', dest='grid_out', help='output grid path; may contain {lambda}')
        avg.add_argument('--torus', action='store_true')
        avg.add_argument('--maximal', action='store_true', help='sup over the selected levels')

        mult = commands.add_parser('mult', parents=[common], help='multiplier experiments')
        modes = mult.add_mutually_exclusive_group()
        for mode in ('main', 'error-scan', 'kernel-check', 'split', 'summed-kernel'):
            modes.add_argument(f'--{mode}', dest='mode', action='store_const', const=mode)
        mult.add_argument('--xi', help='frequency points: a,b,c,d;e,f,g,h')
        mult.add_argument('--x', help='lattice point, comma-separated')
        mult.add_argument('--a', type=int)
        mult.add_argument('--q', dest='moduli', help='moduli, comma-separated')
        mult.add_argument('--q-max', dest='q_max', type=int)
        mult.add_argument('--j', type=int)
        mult.add_argument('--delta', type=float)
        mult.add_argument('--resolution', type=int)
        mult.add_argument('--samples', type=int)
        mult.add_argument('--refine', type=int)

        norm = commands.add_parser('norm', parents=[common], help='operator norm estimates and exponents')
        modes = norm.add_mutually_exclusive_group()
        for mode in ('calc', 'restricted-weak', 'maximal'):
            modes.add_argument(f'--{mode}', dest='mode', action='store_const', const=mode)
        norm.add_argument('--p')
        norm.add_argument('--q')
        norm.add_argument('--method', choices=['probe', 'power'])
        norm.add_argument('--probes', help='probe_best candidates, comma-separated')
        norm.add_argument('--probe', choices=['delta', 'ball'])
        norm.add_argument('--max-iters', dest='max_iters', type=int)
        norm.add_argument('--rel-tol', dest='rel_tol', type=float)
        norm.add_argument('--radius', type=int)
        norm.add_argument('--torus', action='store_true')
        norm.add_argument('--thresholds')
        norm.add_argument('--radii')

        report = commands.add_parser('report', parents=[common], help='fit and compare result tables')
        report.add_argument('--inputs', nargs='+')

    def handle(self, *args, **options):
        command = options['subcommand']
        flags = {key: value for key, value in options.items() if key not in DJANGO_OPTIONS}
        try:
            flags['tolerances'] = _tolerances(flags.get('tolerances')) or None
            config = build_config(command, flags, manifest=options.get('config'))
            with config.applied():
                status = run(config, self.stdout)
        except LabError as e:
            logger.error(f"lab {command} failed: {e}")
            self.stdout.write(json.dumps(e.as_payload(command), sort_keys=True, default=str))
            raise CommandError(str(e), returncode=2)
        except Exception as e:
            logger.exception(f"lab {command} crashed")
            payload = {'error': 'internal_error', 'command': command, 'detail': {'message': str(e)}}
            self.stdout.write(json.dumps(payload, sort_keys=True))
            raise CommandError(str(e), returncode=3)
        if status:
            raise CommandError(f"lab {command}: a checked property failed", returncode=status)
