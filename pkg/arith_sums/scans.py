"""Table scans over the modulus: Weil ratios, the dual identity, Gauss/Weyl/Steckin constants."""
from dataclasses import dataclass, field
from math import gcd
import logging

import numpy as np

from spherelab.concurrency import map_ordered
from spherelab.exceptions import InvalidForm
from .sums import gauss_table, kloosterman, unit_roots, units

logger = logging.getLogger(__name__)


def growth_exponent(qs, values):
    """Least-squares slope of log(running max of ``values``) against log q."""
    qs = np.asarray(qs, dtype=float)
    envelope = np.maximum.accumulate(np.asarray(values, dtype=float))
    keep = (qs > 1) & (envelope > 0)
    if keep.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(qs[keep]), np.log(envelope[keep]), 1)[0])


@dataclass
class WeilRow:
    q: int
    ratio: float
    gcd: int
    abs_value: float


@dataclass
class WeilScan:
    level: int
    m: tuple
    rows: list = field(default_factory=list)

    @property
    def max_ratio(self):
        return max(row.ratio for row in self.rows)

    @property
    def growth(self):
        return growth_exponent([r.q for r in self.rows], [r.ratio for r in self.rows])


def weil_ratio_scan(form, q_max, level, m=None):
    """``|K(q, λ; m)| q^{(d-1)/2} / (q, λ)^{1/2}`` for ``1 <= q <= q_max``.

    The Weil bound only promises ``q^ε`` growth with an unspecified constant,
    so the scan reports the observed maximum and the fitted growth exponent.
    """
    if form.k != 2:
        raise InvalidForm(f"Weil ratios are defined for quadratic forms, got k={form.k}", d=form.d, k=form.k)
    if q_max < 1:
        raise ValueError(f"q_max must be >= 1, got {q_max}")
    m = tuple(int(c) for c in (m if m is not None else (0,) * form.d))

    def row(q):
        value = abs(kloosterman(form, q, level, m))
        common = gcd(q, level) if level else q
        return WeilRow(q, value * q ** ((form.d - 1) / 2) / common ** 0.5, common, value)

    scan = WeilScan(level, m, map_ordered(row, range(1, q_max + 1)))
    logger.info(f"weil scan {form} lambda={level} q<={q_max}: max ratio {scan.max_ratio:.4g}, growth {scan.growth:.3f}")
    return scan


def dual_identity_check(form, a, q, x):
    """``|Σ_b G(a,q;b) e(-b·x/q) - e(aF(x)/q)|``.

    The left side factors over coordinates because ``G`` does.
    """
    if gcd(a, q) != 1:
        raise ValueError(f"a={a} is not a unit mod {q}")
    x = np.asarray(x, dtype=np.int64)
    table = gauss_table(form.k, q)[a % q]
    roots = unit_roots(q)
    b = np.arange(q, dtype=np.int64)
    left = 1.0 + 0j
    for coordinate in x:
        left *= np.sum(table * roots[(-b * coordinate) % q])
    right = roots[(a * form.value(x)) % q]
    return float(abs(left - right))


BOUND_VARIANTS = ('gauss', 'weyl', 'steckin')


def bound_exponent(form, variant):
    if variant == 'gauss':
        if form.k != 2:
            raise InvalidForm("the Gauss bound applies to quadratic forms", d=form.d, k=form.k)
        return form.d / 2
    if variant == 'weyl':
        return form.d / 2 ** form.k
    if variant == 'steckin':
        return form.d / form.k
    raise ValueError(f"unknown bound variant {variant!r}; expected one of {BOUND_VARIANTS}")


@dataclass
class BoundRow:
    q: int
    sup_abs: float
    scaled: float


@dataclass
class BoundScan:
    variant: str
    exponent: float
    rows: list = field(default_factory=list)

    @property
    def constant(self):
        return max(row.scaled for row in self.rows)


def gauss_bound_scan(form, q_max, variant='steckin'):
    """Empirical ``C`` in ``|G(a,q;m)| <= C q^{-s}`` over ``q <= q_max``.

    The supremum over ``m`` is exact: ``G`` is a product of 1-D sums, so it is
    ``(max_c |g(a, c)|)^d`` maximized over units ``a``.
    """
    exponent = bound_exponent(form, variant)

    def row(q):
        per_coordinate = np.abs(gauss_table(form.k, q)[list(units(q))]).max(axis=1)
        sup_abs = float(per_coordinate.max()) ** form.d
        return BoundRow(q, sup_abs, sup_abs * q ** exponent)

    scan = BoundScan(variant, exponent, map_ordered(row, range(1, q_max + 1)))
    logger.info(f"{variant} bound scan {form} q<={q_max}: constant {scan.constant:.4g}")
    return scan
