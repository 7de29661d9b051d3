"""Subcommand implementations behind ``manage.py lab``.

Each runner streams one result table and returns the exit status: 0, or 1
when a checked property fails. Per-level work goes through the worker pool;
rows are written by the caller in level order.
"""
from pathlib import Path
import json
import logging
import time

import numpy as np
from django.conf import settings

from arith_sums.scans import dual_identity_check, gauss_bound_scan, weil_ratio_scan
from arith_sums.serializers import BoundRowSerializer, SumValueSerializer, WeilRowSerializer
from arith_sums.sums import gauss_value, kloosterman_value, ramanujan_direct, ramanujan_value, units
from lattice_shells.serializers import RegularValueSerializer
from lattice_shells.shells import four_square_count, regular_values
from multiplier_lab.kernel import kernel_identity_check, summed_kernel_check
from multiplier_lab.multipliers import (
    dyadic_cutoff, high_envelope, low_high_split, sample_multiplier,
)
from multiplier_lab.scans import error_multiplier_scan
from multiplier_lab.serializers import (
    ErrorScanSerializer, KernelCheckSerializer, MultiplierValueSerializer, SplitSerializer,
)
from norm_lab.exponents import as_fraction, dual_exponent, dyadic_maximal_exponent, exponent_table, trivial_bound_value
from norm_lab.fits import estimate_norm, fit_log_log
from norm_lab.probes import (
    default_radii, default_thresholds, maximal_l2_check, maximal_probe_ratio, restricted_weak_probe,
)
from norm_lab.serializers import ExponentFitSerializer, NormRowSerializer, RestrictedWeakRowSerializer
from operators.averages import ArithmeticMeasure, average, average_auto, average_fft, lp_norm, maximal
from operators.grid import GridFunction
from spherelab.concurrency import map_ordered
from spherelab.exceptions import ConfigError, DegenerateFit
from .reports import NORM_COLUMNS, ResultWriter, build_report
from .selection import parse_levels

logger = logging.getLogger('lab')

SUM_COLUMNS = ('kind', 'q', 'a', 'lambda', 'm', 'real', 'imag', 'magnitude')
METHODS = {'probe': 'probe_best', 'probe_best': 'probe_best', 'power': 'power_iteration',
           'power_iteration': 'power_iteration'}


# Option parsing

def _levels(config):
    if not config.levels:
        raise ConfigError("this command needs --lambda", field='levels')
    levels = parse_levels(config.levels, config.form)
    if not levels:
        raise ConfigError(f"selection {config.levels!r} contains no represented level", field='levels')
    return levels


def _ints(text, name):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(part) for part in str(text).replace(' ', '').split(',') if part]
    except ValueError:
        raise ConfigError(f"--{name} must be comma-separated integers, got {text!r}", field=name)


def _points(text, name, d):
    """``0.1,0.2,0,0;0.5,0,0,0`` as an ``(n, d)`` array."""
    if text is None:
        raise ConfigError(f"this mode needs --{name}", field=name)
    try:
        rows = [[float(v) for v in chunk.split(',')] for chunk in str(text).replace(' ', '').split(';') if chunk]
    except ValueError:
        raise ConfigError(f"--{name} must be comma-separated numbers, got {text!r}", field=name)
    if not rows or any(len(row) != d for row in rows):
        raise ConfigError(f"--{name} needs {d} coordinates per point, got {text!r}", field=name)
    return np.array(rows)


def _exponents(config, required=True):
    if config.p is None:
        if required:
            raise ConfigError("this command needs --p", field='p')
        return None, None
    p = as_fraction(config.p)
    q = dual_exponent(p) if config.q is None else as_fraction(config.q)
    return p, q


def _target(config, stream):
    return config.output or stream


def _moduli(config):
    qs = _ints(config.option('moduli'), 'q')
    return qs or list(range(1, int(config.option('q_max', 12)) + 1))


# shell

def run_shell(config, stream):
    form, cache = config.form, config.cache()
    mode = config.option('mode', 'count')
    status = 0
    if mode == 'count':
        levels = _levels(config)
        counts = map_ordered(lambda level: cache.count(form, level), levels)
        with ResultWriter(_target(config, stream), ('lambda', 'count', 'oracle', 'match'), config) as writer:
            for level, count in zip(levels, counts):
                oracle = four_square_count(level) if (form.d, form.k) == (4, 2) else None
                match = None if oracle is None else count == oracle
                if match is False:
                    status = 1
                    logger.error(f"count mismatch at lambda={level}: {count} != {oracle}")
                writer.write([level, count, oracle, match])
    elif mode == 'enumerate':
        levels = _levels(config)
        columns = ['lambda'] + [f"y{i + 1}" for i in range(form.d)]
        with ResultWriter(_target(config, stream), columns, config) as writer:
            for level in levels:
                shell = cache.shell(form, level, max_points=config.max_shell_points)
                writer.write_all([level, *row] for row in shell.points.tolist())
    elif mode == 'regular':
        level_max = int(config.option('lambda_max') or max(_levels(config)))
        data = RegularValueSerializer(regular_values(form, level_max), many=True).data
        with ResultWriter(_target(config, stream), ('lambda', 'count', 'within_bound', 'expected'), config) as writer:
            writer.write_all(data)
    else:
        raise ConfigError(f"unknown shell mode {mode!r}; expected count, enumerate or regular", field='mode')
    logger.info(f"shell {mode}: cache hits {cache.hits}, misses {cache.misses}")
    return status


# sums

def run_sums(config, stream):
    form, kind = config.form, config.option('kind', 'kloosterman')
    tolerances = config.tolerances
    status = 0
    target = _target(config, stream)

    if kind in ('ramanujan', 'gauss', 'kloosterman'):
        m = _ints(config.option('m'), 'm')
        with ResultWriter(target, SUM_COLUMNS, config) as writer:
            for q in _moduli(config):
                if kind == 'gauss':
                    values = [gauss_value(form, a, q, m) for a in _ints(config.option('a'), 'a') or units(q)]
                elif kind == 'kloosterman':
                    values = [kloosterman_value(form, q, level, m) for level in _levels(config)]
                else:
                    values = []
                    for n in _levels(config):
                        value = ramanujan_value(q, n)
                        if abs(ramanujan_direct(q, n) - value.value) > tolerances['imag_part']:
                            status = 1
                            logger.error(f"ramanujan closed form disagrees at q={q} n={n}")
                        values.append(value)
                writer.write_all(SumValueSerializer(values, many=True).data)

    elif kind == 'weil-scan':
        q_max = int(config.option('q_max', 50))
        m = _ints(config.option('m'), 'm')
        scans = map_ordered(lambda level: weil_ratio_scan(form, q_max, level, m), _levels(config))
        with ResultWriter(target, ('lambda', 'q', 'ratio', 'gcd', 'abs_value'), config) as writer:
            for scan in scans:
                writer.write_all({'lambda': scan.level, **row} for row in WeilRowSerializer(scan.rows, many=True).data)
                writer.comment('weil', json.dumps(
                    {'lambda': scan.level, 'max_ratio': scan.max_ratio, 'growth': scan.growth}, sort_keys=True))

    elif kind == 'dual-check':
        rng = np.random.default_rng(config.seed)
        explicit = config.option('x')
        if explicit is not None:
            q = (_ints(config.option('moduli'), 'q') or [2])[0]
            cases = [(int(config.option('a', 1)), q, _ints(explicit, 'x'))]
        else:
            q_max = int(config.option('q_max', 50))
            cases = []
            for _ in range(int(config.option('samples', 100))):
                q = int(rng.integers(1, q_max + 1))
                a = int(rng.choice(units(q)))
                cases.append((a, q, rng.integers(-50, 51, size=form.d).tolist()))
        with ResultWriter(target, ('a', 'q', 'x', 'residual'), config) as writer:
            for a, q, x in cases:
                residual = dual_identity_check(form, a, q, x)
                if residual > tolerances['dual_residual']:
                    status = 1
                    logger.error(f"dual identity residual {residual:.3e} at a/q={a}/{q} x={x}")
                writer.write([a, q, x, residual])

    elif kind == 'bound-scan':
        scan = gauss_bound_scan(form, int(config.option('q_max', 30)), config.option('variant', 'steckin'))
        with ResultWriter(target, ('q', 'sup_abs', 'scaled'), config) as writer:
            writer.write_all(BoundRowSerializer(scan.rows, many=True).data)
            writer.comment('constant', json.dumps(
                {'variant': scan.variant, 'exponent': scan.exponent, 'constant': scan.constant}, sort_keys=True))
    else:
        raise ConfigError(f"unknown sums kind {kind!r}", field='kind')
    return status


# avg

def _grid_path(config, level, fmt):
    template = config.option('grid_out')
    if template:
        return Path(str(template).format(level=level, **{'lambda': level}))
    return Path(settings.LAB['OUTPUT_DIR']) / f"avg_d{config.d}_l{level}.{fmt}"


def run_avg(config, stream):
    source = config.option('input')
    if not source:
        raise ConfigError("avg needs --input GRID", field='input')
    f = GridFunction.load(source)
    if f.d != config.d:
        raise ConfigError(f"grid has d={f.d} but --d is {config.d}", field='d')
    form, cache = config.form, config.cache()
    levels = _levels(config)
    fmt = config.option('format', 'csv')
    torus = bool(config.option('torus', False))
    apply = {'auto': average_auto, 'sparse': average, 'fft': average_fft}.get(config.option('path', 'auto'))
    if apply is None:
        raise ConfigError(f"unknown averaging path {config.option('path')!r}", field='path')

    columns = ('lambda', 'grid', 'side', 'l1', 'l2', 'linf')
    with ResultWriter(_target(config, stream), columns, config) as writer:
        if config.option('maximal'):
            label = f"{levels[0]}..{levels[-1]}"
            result = maximal(f, levels, form=form, cache=cache)
            path = _grid_path(config, f"max{levels[0]}-{levels[-1]}", fmt)
            path.parent.mkdir(parents=True, exist_ok=True)
            result.save(path, fmt=fmt)
            writer.write([label, path, result.M, lp_norm(result, 1), lp_norm(result, 2), lp_norm(result, np.inf)])
            return 0
        for level in levels:
            measure = ArithmeticMeasure.for_level(form, level, cache=cache)
            result = apply(f, measure, torus=torus)
            path = _grid_path(config, level, fmt)
            path.parent.mkdir(parents=True, exist_ok=True)
            result.save(path, fmt=fmt)
            writer.write([level, path, result.M, lp_norm(result, 1), lp_norm(result, 2), lp_norm(result, np.inf)])
    return 0


# mult

def _fit_comment(writer, levels, values, **meta):
    if len(levels) < settings.LAB['TOLERANCES']['fit_min_points']:
        return None
    try:
        fit = fit_log_log(levels, values, **meta)
    except DegenerateFit as e:
        logger.warning(f"no exponent fit: {e}")
        return None
    writer.comment('fit', json.dumps(ExponentFitSerializer(fit).data, sort_keys=True))
    return fit


def run_mult(config, stream):
    form, cache = config.form, config.cache()
    mode = config.option('mode', 'main')
    target = _target(config, stream)
    tolerances = config.tolerances
    status = 0

    if mode == 'main':
        xi = _points(config.option('xi'), 'xi', form.d)
        columns = ('lambda', 'cutoff', 'xi', 'exact', 'main', 'error')
        with ResultWriter(target, columns, config) as writer:
            for level in _levels(config):
                measure = ArithmeticMeasure.for_level(form, level, cache=cache)
                exact = sample_multiplier(measure, xi, 'exact').values
                main = sample_multiplier(measure, xi, 'main', tolerance=tolerances['imag_part']).values
                for point, e_value, m_value in zip(xi, exact, main):
                    writer.write(MultiplierValueSerializer({
                        'level': level, 'cutoff': dyadic_cutoff(level), 'xi': point.tolist(),
                        'exact': e_value, 'main': m_value, 'error': e_value - m_value,
                    }).data)

    elif mode == 'error-scan':
        levels = _levels(config)

        def scan(level):
            measure = ArithmeticMeasure.for_level(form, level, cache=cache)
            return error_multiplier_scan(
                measure, resolution=int(config.option('resolution', 8)),
                random_samples=int(config.option('samples', 20000)), seed=config.seed,
                budget=config.sample_budget, refine=int(config.option('refine', 16)),
            )

        scans = map_ordered(scan, levels)
        columns = ('lambda', 'cutoff', 'sup_estimate', 'argmax_xi', 'samples', 'seed')
        with ResultWriter(target, columns, config) as writer:
            writer.write_all(ErrorScanSerializer(scans, many=True).data)
            _fit_comment(writer, levels, [s.sup_estimate for s in scans], method='error_scan')

    elif mode == 'kernel-check':
        x = _ints(config.option('x'), 'x') or [0] * form.d
        a = int(config.option('a', 1))
        columns = ('a', 'q', 'lambda', 'x', 'left', 'left_imag', 'right', 'right_imag', 'residual', 'envelope_ratio')
        with ResultWriter(target, columns, config) as writer:
            for level in _levels(config):
                for q in _ints(config.option('moduli'), 'q') or [1]:
                    check = kernel_identity_check(form, a % q if q > 1 else 0, q, level, x)
                    if check.residual > tolerances['kernel_residual']:
                        status = 1
                        logger.error(f"kernel identity residual {check.residual:.3e} at q={q} lambda={level}")
                    writer.write(KernelCheckSerializer(check).data)

    elif mode == 'summed-kernel':
        x = _ints(config.option('x'), 'x') or [0] * form.d
        with ResultWriter(target, ('lambda', 'q', 'x', 'summed', 'bound', 'ramanujan'), config) as writer:
            for level in _levels(config):
                for q in _moduli(config):
                    row = summed_kernel_check(form, q, level, x)
                    if row.summed > row.bound * (1 + 1e-9) + 1e-15:
                        status = 1
                    writer.write([level, q, list(row.x), row.summed, row.bound, row.ramanujan])

    elif mode == 'split':
        xi = _points(config.option('xi'), 'xi', form.d)
        j = int(config.option('j', 0))
        columns = ('lambda', 'j', 'delta', 'xi', 'low', 'high', 'envelope')
        with ResultWriter(target, columns, config) as writer:
            for level in _levels(config):
                delta = float(config.option('delta', np.sqrt(level)))
                low, high = low_high_split(form, level, j, delta, xi)
                envelope = high_envelope(form.d, level, j, delta)
                for point, lo, hi in zip(xi, low, high):
                    writer.write(SplitSerializer({
                        'level': level, 'j': j, 'delta': delta, 'xi': point.tolist(),
                        'low': lo.real, 'high': hi.real, 'envelope': envelope,
                    }).data)
    else:
        raise ConfigError(f"unknown mult mode {mode!r}", field='mode')
    return status


# norm

def _norm_options(config, method):
    if method == 'probe_best':
        probes = config.option('probes', 'delta,ball')
        return {'probes': tuple(str(probes).split(','))}
    options = {'max_iters': int(config.option('max_iters', 50)), 'seed': config.seed,
               'torus': bool(config.option('torus', False))}
    if config.option('radius') is not None:
        options['radius'] = int(config.option('radius'))
    if config.option('rel_tol') is not None:
        options['rel_tol'] = float(config.option('rel_tol'))
    return options


def run_norm(config, stream):
    form, cache = config.form, config.cache()
    mode = config.option('mode', 'estimate')
    target = _target(config, stream)
    status = 0

    if mode == 'calc':
        p, _ = _exponents(config)
        with ResultWriter(target, ('name', 'exact', 'value'), config) as writer:
            for name, value in exponent_table(form, p).items():
                writer.write([name, value, float(value)])
        return 0

    if mode == 'restricted-weak':
        columns = ('lambda', 'radius', 'threshold', 'size', 'set_size', 'bound', 'ratio')
        thresholds = config.option('thresholds')
        with ResultWriter(target, columns, config) as writer:
            for level in _levels(config):
                count = cache.count(form, level)
                grid = [float(t) for t in str(thresholds).split(',')] if thresholds else default_thresholds(count)
                radii = _ints(config.option('radii'), 'radii') or default_radii(level)
                table = restricted_weak_probe(form, level, grid, radii, cache=cache)
                writer.write_all({'lambda': level, **row}
                                 for row in RestrictedWeakRowSerializer(table.rows, many=True).data)
                writer.comment('max_ratio', json.dumps({'lambda': level, 'max_ratio': table.max_ratio}))
        return 0

    p, q = _exponents(config)
    if mode == 'maximal':
        probe = config.option('probe', 'delta')
        with ResultWriter(target, ('base', 'probe', 'ratio', 'l2_ratio', 'predicted'), config) as writer:
            for base in _levels(config):
                ratio = maximal_probe_ratio(probe, form, base, p, q, cache=cache)
                l2 = maximal_l2_check(form, base, seed=config.seed, cache=cache) if base >= 2 else None
                writer.write([base, probe, ratio, l2, -dyadic_maximal_exponent(form.d, p)])
        return 0
    if mode != 'estimate':
        raise ConfigError(f"unknown norm mode {mode!r}", field='mode')

    method = METHODS.get(config.method or 'probe')
    if method is None:
        raise ConfigError(f"unknown method {config.method!r}; expected probe or power", field='method')
    levels = _levels(config)
    options = _norm_options(config, method)
    rows = map_ordered(lambda level: estimate_norm(form, level, p, q, method=method, cache=cache, **options), levels)
    with ResultWriter(target, NORM_COLUMNS, config) as writer:
        for row in rows:
            ceiling = trivial_bound_value(form, row.level, p)
            if (q == dual_exponent(p)) and row.estimate > ceiling:
                status = 1
                logger.error(f"estimate {row.estimate:.6e} at lambda={row.level} exceeds the trivial bound {ceiling:.6e}")
            if not config.timings:
                row.seconds = None
            writer.write(NormRowSerializer(row).data)
        fit = _fit_comment(writer, levels, [row.estimate for row in rows], p=p, q=q, method=method)
    if fit is not None:
        logger.info(f"norm fit p={p} q={q}: slope {fit.slope:.4f}")
    return status


# report

def run_report(config, stream):
    inputs = config.option('inputs')
    if not inputs:
        raise ConfigError("report needs --inputs", field='inputs')
    paths = inputs if isinstance(inputs, (list, tuple)) else str(inputs).split(',')
    build_report([Path(path) for path in paths], _target(config, stream), config)
    return 0


RUNNERS = {
    'shell': run_shell,
    'sums': run_sums,
    'avg': run_avg,
    'mult': run_mult,
    'norm': run_norm,
    'report': run_report,
}


def run(config, stream):
    started = time.perf_counter()
    logger.info(f"lab {config.command} started: {config.echo()}")
    status = RUNNERS[config.command](config, stream)
    logger.info(f"lab {config.command} finished with status {status} in {time.perf_counter() - started:.2f}s")
    return status
