"""The cutoff Ψ: 1 on [-1/8, 1/8]^d, 0 off [-1/4, 1/4]^d, tensorized from a 1-D profile.

The 1-D transition is the normalized running integral of the standard
mollifier ``exp(-1/(1-s²))``, so every derivative vanishes at both ends.
"""
from functools import lru_cache
import logging

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

logger = logging.getLogger(__name__)

INNER = 1 / 8
OUTER = 1 / 4

_STEP_NODES, _STEP_WEIGHTS = roots_legendre(48)


def mollifier(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


# the same rule at u = 1, so the step ends at exactly 1
_STEP_MASS = np.sum(_STEP_WEIGHTS * mollifier(-1.0 + 1.0 * (_STEP_NODES + 1.0)))


def smoothstep(u):
    """0 at u <= 0, 1 at u >= 1, ``∫_{-1}^{2u-1} φ / ∫ φ`` in between."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    nodes = -1.0 + u[..., None] * (_STEP_NODES + 1.0)
    step = np.sum(_STEP_WEIGHTS * mollifier(nodes), axis=-1) * u / _STEP_MASS
    return np.clip(step, 0.0, 1.0)


def psi(t):
    """1-D profile, even, ``0 <= psi <= 1``."""
    a = np.abs(np.asarray(t, dtype=float))
    shape = a.shape
    a = a.reshape(-1)
    out = np.where(a <= INNER, 1.0, 0.0)
    ramp = (a > INNER) & (a < OUTER)
    if np.any(ramp):
        out[ramp] = 1.0 - smoothstep((a[ramp] - INNER) / (OUTER - INNER))
    return out.reshape(shape)


@lru_cache(maxsize=1)
def _ramp_rule(panels=4, nodes=32):
    x, w = roots_legendre(nodes)
    edges = np.linspace(INNER, OUTER, panels + 1)
    t = np.concatenate([(lo + hi) / 2 + (hi - lo) / 2 * x for lo, hi in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([(hi - lo) / 2 * w for lo, hi in zip(edges[:-1], edges[1:])])
    return t, weights * psi(t)


def psi_hat_direct(u):
    """``∫ ψ(t) e(ut) dt = sin(πu/4)/(πu) + 2∫_{1/8}^{1/4} ψ(t) cos(2πut) dt``."""
    u = np.asarray(u, dtype=float)
    t, weighted = _ramp_rule()
    ramp = np.cos(2 * np.pi * u[..., None] * t) @ weighted
    return 0.25 * np.sinc(u / 4) + 2 * ramp


# ψ̂ is tabulated on [0, SPLINE_RANGE] and evaluated by cubic spline inside it
SPLINE_RANGE = 96.0
SPLINE_STEP = 1 / 512


@lru_cache(maxsize=1)
def _psi_hat_spline():
    grid = np.arange(0.0, SPLINE_RANGE + SPLINE_STEP, SPLINE_STEP)
    values = np.concatenate([psi_hat_direct(chunk) for chunk in np.array_split(grid, 64)])
    logger.debug(f"tabulated psi_hat on {grid.size} nodes")
    return CubicSpline(grid, values)


def psi_hat(u):
    u = np.abs(np.asarray(u, dtype=float))
    inside = u <= SPLINE_RANGE
    if np.all(inside):
        return _psi_hat_spline()(u)
    shape = u.shape
    u, inside = u.reshape(-1), inside.reshape(-1)
    out = np.empty_like(u)
    out[inside] = _psi_hat_spline()(u[inside])
    out[~inside] = psi_hat_direct(u[~inside])
    return out.reshape(shape)


class BumpPsi:
    """``Ψ(ξ) = Π ψ(ξ_i)`` and its Fourier transform ``Ψ̃(w) = Π ψ̂(w_i)``."""

    def __init__(self, d):
        self.d = d

    def __call__(self, xi):
        return np.prod(psi(xi), axis=-1)

    def fourier(self, w):
        return np.prod(psi_hat(w), axis=-1)
