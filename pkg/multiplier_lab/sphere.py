"""Fourier transform of the normalized surface measure on S^{d-1}, and quadrature on the sphere."""
from functools import lru_cache
from math import ceil
import logging

import numpy as np
from django.conf import settings
from scipy.special import gamma, jv, roots_legendre

from spherelab.exceptions import QuadratureBudgetExceeded

logger = logging.getLogger(__name__)

# below this radius the power series is used
SERIES_CUTOFF = 0.5
SERIES_TERMS = 30


def sphere_ft(d, r):
    """``Γ(d/2) (πr)^{1-d/2} J_{d/2-1}(2πr)``; equals 1 at ``r = 0``."""
    r = np.abs(np.asarray(r, dtype=float))
    nu = d / 2 - 1
    out = np.empty(r.shape)
    small = r < SERIES_CUTOFF
    if np.any(small):
        z2 = (np.pi * r[small]) ** 2
        term = np.ones_like(z2)
        total = np.ones_like(z2)
        for m in range(1, SERIES_TERMS):
            term = term * (-z2) / (m * (m + nu))
            total = total + term
        out[small] = total
    large = ~small
    if np.any(large):
        x = r[large]
        out[large] = gamma(d / 2) * (np.pi * x) ** (-nu) * jv(nu, 2 * np.pi * x)
    return out if out.ndim else float(out)


def decay_envelope(d, r):
    return (1.0 + np.asarray(r, dtype=float)) ** (-(d - 1) / 2)


def sphere_ft_decay_constant(d, r_max=200.0, samples=200001):
    """Empirical ``C_d`` in ``|sphere_ft(d, r)| <= C_d (1 + r)^{-(d-1)/2}`` on ``[0, r_max]``."""
    r = np.linspace(0.0, r_max, samples)
    return float(np.max(np.abs(sphere_ft(d, r)) / decay_envelope(d, r)))


def sphere_nodes(r):
    """Gauss-Legendre order that resolves ``e(r ω·v)`` for unit ``v``; the error falls off once ``n > e π² r / 4``."""
    return ceil(8 * abs(r)) + 32


class SphereQuadrature:
    """Product rule for the uniform probability measure on S^{d-1}.

    Hyperspherical angles θ_1..θ_{d-2} in [0, π] use Gauss-Legendre with the
    ``sin^{d-1-j} θ_j`` density folded into the weights; the azimuth uses the
    trapezoid rule with ``2n`` points.
    """

    def __init__(self, d, n=48):
        if d < 2:
            raise ValueError(f"sphere dimension must be >= 2, got {d}")
        size = n ** (d - 2) * 2 * n
        if size > settings.LAB['QUADRATURE_POINTS']:
            raise QuadratureBudgetExceeded(
                f"sphere rule with n={n} in d={d} needs {size} points",
                points=size, budget=settings.LAB['QUADRATURE_POINTS'],
            )
        self.d = d
        self.n = n
        self.points, self.weights = _sphere_rule(d, n)

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        return np.tensordot(values, self.weights, axes=([-1], [0]))

    def integrate_function(self, fn, chunk=1 << 18):
        total = 0.0
        for start in range(0, len(self.weights), chunk):
            block = slice(start, start + chunk)
            total = total + np.sum(fn(self.points[block]) * self.weights[block])
        return total


@lru_cache(maxsize=8)
def _sphere_rule(d, n):
    x, w = roots_legendre(n)
    theta = np.pi / 2 * (x + 1)
    theta_weights = np.pi / 2 * w
    phi = 2 * np.pi * np.arange(2 * n) / (2 * n)

    angles = np.meshgrid(*([theta] * (d - 2) + [phi]), indexing='ij')
    angles = [a.reshape(-1) for a in angles]
    weight = np.ones(angles[0].shape)
    grids = np.meshgrid(*([theta_weights] * (d - 2) + [np.full(2 * n, 2 * np.pi / (2 * n))]), indexing='ij')
    for g in grids:
        weight *= g.reshape(-1)

    points = np.empty((weight.size, d))
    running = np.ones(weight.size)
    for j, angle in enumerate(angles[:-1]):
        points[:, j] = running * np.cos(angle)
        weight *= np.sin(angle) ** (d - 2 - j)
        running = running * np.sin(angle)
    points[:, d - 2] = running * np.cos(angles[-1])
    points[:, d - 1] = running * np.sin(angles[-1])
    weight /= weight.sum()
    points.flags.writeable = False
    weight.flags.writeable = False
    logger.debug(f"sphere rule d={d} n={n}: {weight.size} points")
    return points, weight
