"""Kernels of the single-fraction main terms and the identity they satisfy.

For a reduced ``a/q`` the kernel of ``Σ_m G(a,q;m) Ψ(qξ - m) σ̃(√λ(ξ - m/q))``
factors as ``[Σ_b G(a,q;b) e(-x·b/q)] · I(x)`` with

    I(x) = ∫ Ψ(qη) σ̃(√λ|η|) e(x·η) dη
         = λ^{-d/2} s^d ∫_{S^{d-1}} Ψ̃(s(x/√λ - ω)) dσ(ω),   s = √λ/q.

``kernel_identity_check`` evaluates the first line by quadrature on the
frequency side (with the Gauss sums summed over all of (Z/q)^d) and the second
by quadrature over the sphere, multiplied by ``e(aF(x)/q)``.
"""
from dataclasses import dataclass
from functools import lru_cache, reduce
from math import ceil, sqrt
import logging

import numpy as np
from django.conf import settings
from scipy.special import roots_legendre

from arith_sums.sums import RationalPoint, gauss_table, ramanujan, unit_roots, units
from spherelab.exceptions import QuadratureBudgetExceeded
from .bump import BumpPsi, psi
from .multipliers import modulus_cutoff, require_sphere
from .sphere import SphereQuadrature, sphere_ft, sphere_nodes

logger = logging.getLogger(__name__)

FOURIER_NODES = 24


@lru_cache(maxsize=4)
def _fourier_grid(d, q, level, nodes):
    """Gauss-Legendre nodes on ``[0, 1/(4q)]`` split at ``1/(8q)``, and the tensor of weights."""
    size = (2 * nodes) ** d
    if size > settings.LAB['QUADRATURE_POINTS']:
        raise QuadratureBudgetExceeded(
            f"frequency-side rule needs {size} points (nodes={nodes}, d={d})",
            points=size, budget=settings.LAB['QUADRATURE_POINTS'],
        )
    x, w = roots_legendre(nodes)
    edges = (0.0, 1 / (8 * q), 1 / (4 * q))
    t = np.concatenate([(lo + hi) / 2 + (hi - lo) / 2 * x for lo, hi in zip(edges[:-1], edges[1:])])
    wt = np.concatenate([(hi - lo) / 2 * w for lo, hi in zip(edges[:-1], edges[1:])])
    per_axis = psi(q * t) * wt
    radius = np.sqrt(reduce(np.add.outer, [t ** 2] * d))
    weights = sphere_ft(d, sqrt(level) * radius) * reduce(np.multiply.outer, [per_axis] * d)
    weights.flags.writeable = False
    return t, weights


def fourier_side(form, q, level, x, nodes=FOURIER_NODES):
    """``I(x)`` from the frequency side; the integrand is even in every coordinate."""
    t, weights = _fourier_grid(form.d, q, level, nodes)
    out = weights
    for coordinate in np.asarray(x, dtype=float):
        out = np.tensordot(np.cos(2 * np.pi * coordinate * t), out, axes=([0], [0]))
    return float(out) * 2 ** form.d


def sphere_side(form, q, level, x, n=None):
    """``I(x)`` from the mollified surface measure."""
    s = sqrt(level) / q
    # the integrand has frequency at most s√d/4 in ω, whatever x is
    n = n or max(40, ceil(8 * s), sphere_nodes(s * sqrt(form.d) / 4))
    rule = SphereQuadrature(form.d, n)
    bump = BumpPsi(form.d)
    u = np.asarray(x, dtype=float) / sqrt(level)
    integral = rule.integrate_function(lambda omega: bump.fourier(s * (u - omega)))
    return float(integral) / q ** form.d


def phase_sum(form, a, q, x):
    """``Σ_{b ∈ (Z/q)^d} G(a,q;b) e(-x·b/q)`` summed over the full residue box."""
    g = gauss_table(form.k, q)[a % q]
    x = np.asarray(x, dtype=np.int64)
    roots = unit_roots(q)
    b = np.arange(q, dtype=np.int64)
    gauss = reduce(np.multiply.outer, [g] * form.d)
    phases = reduce(np.multiply.outer, [roots[(-b * c) % q] for c in x])
    return complex(np.sum(gauss * phases))


def kernel_envelope(d, level, x):
    """``λ^{(1-d)/2} (1 + |x|/√λ)^{-2d}``."""
    return level ** ((1 - d) / 2) * (1 + np.linalg.norm(x) / sqrt(level)) ** (-2 * d)


@dataclass
class KernelCheck:
    a: int
    q: int
    level: int
    x: tuple
    left: complex
    right: complex
    residual: float
    envelope: float

    @property
    def envelope_ratio(self):
        return max(abs(self.left), abs(self.right)) / self.envelope


def kernel_identity_check(form, a, q, level, x, nodes=FOURIER_NODES, sphere_n=None):
    """Residual of the kernel identity at one lattice point ``x``."""
    require_sphere(form)
    point = RationalPoint(a, q)
    if not point.is_reduced:
        raise ValueError(f"a={a} is not a unit mod {q}")
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    x = tuple(int(c) for c in x)
    left = phase_sum(form, a, q, x) * fourier_side(form, q, level, x, nodes)
    right = unit_roots(q)[(a * form.value(x)) % q] * sphere_side(form, q, level, x, sphere_n)
    check = KernelCheck(point.a, q, level, x, complex(left), complex(right), float(abs(left - right)),
                        float(kernel_envelope(form.d, level, x)))
    logger.info(f"kernel identity a/q={a}/{q} lambda={level} x={x}: residual {check.residual:.3e}")
    return check


@dataclass
class SummedKernelRow:
    q: int
    x: tuple
    summed: float
    bound: float
    ramanujan: int


def summed_kernel_check(form, q, level, x, nodes=FOURIER_NODES):
    """``|Σ_a L^{a/q}_λ(x)|`` against ``q |I(x)|``.

    The a-sum of the phases is the Ramanujan sum ``c_q(F(x))``, which is
    reported alongside.
    """
    require_sphere(form)
    x = tuple(int(c) for c in x)
    mollified = fourier_side(form, q, level, x, nodes)
    summed = sum(phase_sum(form, a, q, x) for a in units(q)) * mollified
    return SummedKernelRow(q, x, float(abs(summed)), q * abs(mollified), ramanujan(q, form.value(x)))


def main_kernel(form, level, x, sphere_n=None):
    """Kernel of the raw main term: ``Σ_{q <= Λ^{1/2}} c_q(F(x) - λ) I_q(x)``."""
    require_sphere(form)
    shift = form.value(x) - level
    return sum(ramanujan(q, shift) * sphere_side(form, q, level, x, sphere_n)
               for q in range(1, modulus_cutoff(level) + 1))


def main_kernel_ratio(form, level, x, sphere_n=None):
    """``|main kernel(x)| / λ^{-(d-2)/2}``; stays bounded when the kernel bound holds."""
    return abs(main_kernel(form, level, x, sphere_n)) / level ** (-(form.d - 2) / 2)
