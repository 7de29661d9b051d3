"""Certified lower bounds on ``‖A_λ‖_{ℓ^p → ℓ^q}`` from explicit test functions.

Each ratio ``‖A_λ f‖_q / ‖f‖_p`` is computed exactly on Z^d (no wrap-around),
so it is a genuine lower bound on the operator norm.
"""
from dataclasses import dataclass, field
from math import ceil, isqrt, log
import logging

import numpy as np

from operators.averages import ArithmeticMeasure, average_auto, average_support, dyadic_levels, lp_norm, maximal
from operators.grid import GridFunction
from .exponents import as_fraction, dual_exponent, restricted_weak_level_exponent

logger = logging.getLogger(__name__)

# sparse output is used while |supp f|·N stays below this many scattered points
SUPPORT_PATH_LIMIT = 4_000_000


def ceil_sqrt(level):
    root = isqrt(level)
    return root if root * root == level else root + 1


def probe_grid(probe, d, level):
    """``'delta'``, ``'ball'`` (radius ⌈√λ⌉), ``('ball', R)`` or a ready ``GridFunction``."""
    if isinstance(probe, GridFunction):
        return probe
    if probe == 'delta':
        return GridFunction.delta(d)
    if probe == 'ball':
        return GridFunction.ball(d, ceil_sqrt(level))
    if isinstance(probe, tuple) and probe[0] == 'ball':
        return GridFunction.ball(d, probe[1])
    raise ValueError(f"unknown probe {probe!r}")


def apply_values(f, measure):
    """Values of ``A_λ f`` on Z^d (zeros omitted or not, which does not change any norm)."""
    if len(f.support()) * measure.count <= SUPPORT_PATH_LIMIT:
        return average_support(f, measure)[1]
    return average_auto(f, measure).values


def _norm(values, exponent):
    return lp_norm(values, float(exponent))


def probe_ratio(probe, form, level, p, q=None, measure=None, cache=None):
    """``‖A_λ f‖_q / ‖f‖_p``; ``q`` defaults to ``p'``."""
    q = dual_exponent(p) if q is None else as_fraction(q)
    measure = measure or ArithmeticMeasure.for_level(form, level, cache=cache)
    f = probe_grid(probe, form.d, level)
    denominator = _norm(f.values, as_fraction(p))
    if denominator == 0:
        raise ValueError("probe function is identically zero")
    return _norm(apply_values(f, measure), q) / denominator


def delta_ratio(count, q):
    """``N^{1/q - 1}``, the exact delta-probe ratio."""
    q = as_fraction(q)
    return float(count) ** (-1.0 if q == float('inf') else float(1 / q - 1))


@dataclass
class RestrictedWeakRow:
    radius: int
    threshold: float
    size: int
    set_size: int
    bound: float

    @property
    def ratio(self):
        return self.size / self.bound


@dataclass
class RestrictedWeakTable:
    level: int
    rows: list = field(default_factory=list)

    @property
    def max_ratio(self):
        return max((row.ratio for row in self.rows), default=0.0)


def restricted_weak_probe(form, level, thresholds, radii, cache=None):
    """Superlevel sets ``|{A_λ 1_X > T}|`` for balls ``X`` against ``λ^e T^{-(d+1)} |X|^d``.

    ``thresholds`` may be numbers or ``'inv2N'`` for ``1/(2N)``; radius 0 is a single point.
    """
    measure = ArithmeticMeasure.for_level(form, level, cache=cache)
    d = form.d
    power = float(restricted_weak_level_exponent(d))
    table = RestrictedWeakTable(level)
    for radius in radii:
        f = GridFunction.ball(d, radius)
        set_size = int(np.count_nonzero(f.values))
        values = apply_values(f, measure)
        for threshold in thresholds:
            threshold = 1 / (2 * measure.count) if threshold == 'inv2N' else float(threshold)
            size = int(np.count_nonzero(values.real > threshold))
            bound = level ** power * threshold ** -(d + 1) * set_size ** d
            table.rows.append(RestrictedWeakRow(int(radius), threshold, size, set_size, bound))
    logger.info(f"restricted weak table lambda={level}: {len(table.rows)} rows, max ratio {table.max_ratio:.4g}")
    return table


def default_radii(level):
    return sorted({1, ceil(level ** 0.25), ceil_sqrt(level)})


def default_thresholds(count, steps=8):
    """Dyadic thresholds ``2^{-i}`` down to about ``1/N``."""
    deepest = max(1, min(steps, int(np.ceil(np.log2(count))) + 1))
    return [2.0 ** -i for i in range(1, deepest + 1)]


def maximal_probe_ratio(probe, form, base, p, q=None, odd_only=None, cache=None):
    """``‖sup_{Λ <= λ < 2Λ} |A_λ f|‖_q / ‖f‖_p`` for the dyadic maximal function."""
    odd_only = form.d == 4 if odd_only is None else odd_only
    q = dual_exponent(p) if q is None else as_fraction(q)
    levels = dyadic_levels(form, base, odd_only=odd_only)
    f = probe_grid(probe, form.d, 2 * base - 1)
    sup = maximal(f, levels, form=form, cache=cache)
    return _norm(sup.values, q) / _norm(f.values, as_fraction(p))


def maximal_l2_check(form, base, f=None, seed=0, odd_only=None, cache=None):
    """``‖sup |A_λ f|‖_2 / ((log Λ)^2 ‖f‖_2)`` over the dyadic block at ``Λ = base``."""
    if base < 2:
        raise ValueError(f"dyadic base must be >= 2, got {base}")
    odd_only = form.d == 4 if odd_only is None else odd_only
    if f is None:
        f = GridFunction.random(form.d, 2 * ceil_sqrt(base) + 1, rng=seed)
    levels = dyadic_levels(form, base, odd_only=odd_only)
    sup = maximal(f, levels, form=form, cache=cache)
    return lp_norm(sup, 2) / (log(base) ** 2 * lp_norm(f, 2))
