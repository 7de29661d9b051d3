from dataclasses import dataclass
import logging
import time

import numpy as np
from django.conf import settings

from operators.averages import ArithmeticMeasure
from spherelab.concurrency import map_ordered
from spherelab.exceptions import DegenerateFit
from .exponents import as_fraction, dual_exponent
from .power import power_iteration_lower_bound
from .probes import probe_ratio

logger = logging.getLogger(__name__)


@dataclass
class ExponentFit:
    levels: list
    estimates: list
    slope: float
    intercept: float
    residual: float
    p: object = None
    q: object = None
    method: str = None

    @property
    def pairs(self):
        return list(zip(self.levels, self.estimates))

    def predict(self, level):
        return float(np.exp(self.intercept) * level ** self.slope)


def fit_log_log(levels, estimates, p=None, q=None, method=None, min_points=None):
    """Least-squares line through ``(log λ, log estimate)``."""
    tolerances = settings.LAB['TOLERANCES']
    min_points = tolerances['fit_min_points'] if min_points is None else min_points
    levels = [int(level) for level in levels]
    estimates = [float(value) for value in estimates]
    if len(levels) != len(estimates):
        raise DegenerateFit(f"{len(levels)} levels but {len(estimates)} estimates")
    if len(levels) < min_points:
        raise DegenerateFit(f"need at least {min_points} points, got {len(levels)}", points=len(levels))
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise DegenerateFit("levels must be strictly increasing", levels=levels)
    if levels[0] < 1 or min(estimates) <= 0 or not np.all(np.isfinite(estimates)):
        raise DegenerateFit("log-log fits need positive levels and positive finite estimates")

    x, y = np.log(levels), np.log(estimates)
    if np.ptp(x) == 0:
        raise DegenerateFit("levels have zero spread in log scale")
    (slope, intercept), residuals, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(residuals[0]) if len(residuals) else 0.0
    if residual > tolerances['fit_residual']:
        logger.warning(f"poor exponent fit: residual {residual:.3g} over {len(levels)} points")
    logger.info(f"fitted slope {slope:.4f} over lambda in [{levels[0]}, {levels[-1]}]")
    return ExponentFit(levels, estimates, float(slope), float(intercept), residual, p, q, method)


METHODS = ('probe_best', 'power_iteration')


@dataclass
class NormRow:
    level: int
    estimate: float
    method: str
    iters: int = 0
    seconds: float = None
    witness: str = None


def estimate_norm(form, level, p, q=None, method='probe_best', probes=('delta', 'ball'), cache=None, **options):
    """One lower bound on ``‖A_λ‖_{p → q}`` and the probe or seed that achieved it."""
    started = time.perf_counter()
    if method == 'probe_best':
        measure = ArithmeticMeasure.for_level(form, level, cache=cache)
        ratios = {str(probe): probe_ratio(probe, form, level, p, q, measure=measure) for probe in probes}
        witness = max(ratios, key=ratios.get)
        row = NormRow(level, ratios[witness], method, 0, witness=witness)
    elif method == 'power_iteration':
        result = power_iteration_lower_bound(form, level, p, q, cache=cache, **options)
        row = NormRow(level, result.estimate, method, result.iters, witness=f"{result.seed}:{result.status}")
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    row.seconds = time.perf_counter() - started
    return row


def estimate_norms(form, levels, p, q=None, method='probe_best', **options):
    """``estimate_norm`` for every level, run on the worker pool, rows in level order."""
    return map_ordered(lambda level: estimate_norm(form, level, p, q, method=method, **options), list(levels))


def fit_exponent(form, p, levels, method='probe_best', q=None, rows=None, **options):
    """Fit ``log estimate`` against ``log λ``; the slope is the empirical ``-η_p``."""
    q = dual_exponent(p) if q is None else as_fraction(q)
    rows = estimate_norms(form, levels, p, q, method=method, **options) if rows is None else rows
    return fit_log_log([row.level for row in rows], [row.estimate for row in rows], p=p, q=q, method=method)
