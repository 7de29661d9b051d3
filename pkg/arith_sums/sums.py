"""Ramanujan, Gauss and Kloosterman/Salié sums.

Convention: ``e(t) = exp(-2πi t)``. With this sign the 1-D Gauss table is a
forward DFT, so ``scipy.fft.fft`` evaluates a whole row of frequencies at once.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd
import logging

import numpy as np
from scipy import fft
from sympy import divisors
from sympy.functions.combinatorial.numbers import mobius

logger = logging.getLogger(__name__)


def e(t):
    return np.exp(-2j * np.pi * np.asarray(t, dtype=float))


@lru_cache(maxsize=1024)
def unit_roots(q):
    """Table of ``e(j/q)`` for ``0 <= j < q``."""
    table = e(np.arange(q) / q)
    table.flags.writeable = False
    return table


@lru_cache(maxsize=1024)
def units(q):
    """Reduced residues mod ``q``; ``(0,)`` for ``q = 1``."""
    if q < 1:
        raise ValueError(f"modulus must be positive, got {q}")
    if q == 1:
        return (0,)
    return tuple(a for a in range(1, q) if gcd(a, q) == 1)


@dataclass(frozen=True)
class RationalPoint:
    a: int
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"modulus must be positive, got {self.q}")
        object.__setattr__(self, 'a', self.a % self.q)

    @property
    def is_reduced(self):
        return gcd(self.a, self.q) == 1

    def __float__(self):
        return self.a / self.q

    @staticmethod
    def major_arc_centers(xi, q):
        """``m = round(qξ)`` per row, and the rows where ``qξ - m`` lies in ``[-1/4, 1/4]^d``."""
        scaled = q * np.atleast_2d(np.asarray(xi, dtype=float))
        m = np.rint(scaled)
        return m.astype(np.int64), np.all(np.abs(scaled - m) <= 0.25, axis=1)

    @staticmethod
    def major_arc_center(xi, q):
        """The unique ``m`` with ``qξ - m`` in ``[-1/4, 1/4]^d``, or ``None``."""
        m, near = RationalPoint.major_arc_centers(xi, q)
        return m[0] if near[0] else None


@dataclass
class SumValue:
    kind: str
    value: complex
    q: int
    a: int = None
    level: int = None
    m: tuple = field(default=None)

    @property
    def magnitude(self):
        return abs(self.value)


def ramanujan(q, n):
    """``c_q(n) = Σ_{d | (q, n)} d μ(q/d)`` with ``(q, 0) = q``; exact integer."""
    if q < 1:
        raise ValueError(f"modulus must be positive, got {q}")
    g = gcd(q, n) if n else q
    return sum(d * int(mobius(q // d)) for d in divisors(g))


def ramanujan_direct(q, n):
    roots = unit_roots(q)
    return complex(sum(roots[(a * n) % q] for a in units(q)))


@lru_cache(maxsize=256)
def gauss_table(k, q):
    """``g[a, c] = q^{-1} Σ_b e((a b^k + b c)/q)`` for all residues ``a`` and ``c``."""
    b = np.arange(q, dtype=np.int64)
    bk = np.array([pow(int(x), k, q) for x in b], dtype=np.int64)
    phases = unit_roots(q)[(np.arange(q, dtype=np.int64)[:, None] * bk[None, :]) % q]
    table = fft.fft(phases, axis=1) / q
    table.flags.writeable = False
    return table


def _residues(m, q, d):
    m = np.zeros(d, dtype=np.int64) if m is None else np.asarray(m, dtype=np.int64)
    if m.shape[-1] != d:
        raise ValueError(f"frequency must have {d} coordinates, got shape {m.shape}")
    return m % q


def gauss_sum(form, a, q, m=None):
    """Normalized ``G(a, q; m)`` as a product of 1-D sums."""
    table = gauss_table(form.k, q)
    return complex(np.prod(table[a % q, _residues(m, q, form.d)]))


def kloosterman(form, q, level, m=None):
    """``K(q, λ; m) = Σ_{a ∈ (Z/q)^×} e(-aλ/q) G(a, q; m)``."""
    return complex(kloosterman_batch(form, q, level, _residues(m, q, form.d)[None, :])[0])


def kloosterman_batch(form, q, level, ms):
    """``K(q, λ; m)`` for every row of ``ms`` (shape ``(n, d)``)."""
    ms = np.asarray(ms, dtype=np.int64) % q
    unit = np.asarray(units(q), dtype=np.int64)
    table = gauss_table(form.k, q)[unit]
    weights = unit_roots(q)[(-unit * level) % q]
    # table[:, ms] has shape (units, n, d)
    gauss = np.prod(table[:, ms], axis=2)
    return weights @ gauss


def gauss_value(form, a, q, m=None):
    return SumValue('gauss', gauss_sum(form, a, q, m), q, a=a % q,
                    m=tuple(int(c) for c in _residues(m, q, form.d)))


def kloosterman_value(form, q, level, m=None):
    return SumValue('kloosterman', kloosterman(form, q, level, m), q, level=level,
                    m=tuple(int(c) for c in _residues(m, q, form.d)))


def ramanujan_value(q, n):
    return SumValue('ramanujan', complex(ramanujan(q, n)), q, level=n)
