"""Major-arc multipliers for the sphere (k = 2).

``main_term_multiplier`` evaluates

    ρ(λ) Σ_{q <= Λ^{1/2}} Σ_m K(q, λ; m) Ψ(qξ - m) σ̃(√λ |ξ - m/q|)

where ``Λ = 2^j`` with ``2^{j-1} <= λ < 2^j`` and ``ρ`` is ``singular_density``,
which turns the counting normalization into the probability normalization of
``A_λ``. For each ``q`` at most one ``m`` meets the support of ``Ψ(qξ - m)``.
"""
from dataclasses import dataclass
from math import gamma, isqrt, pi, sqrt
import logging

import numpy as np
from django.conf import settings

from arith_sums.sums import RationalPoint, kloosterman_batch
from lattice_shells.shells import count_shell
from spherelab.exceptions import InvalidForm, NumericalDrift, RegimeViolation
from .bump import BumpPsi
from .sphere import sphere_ft

logger = logging.getLogger(__name__)


def require_sphere(form):
    if not form.is_sphere:
        raise InvalidForm(f"multipliers are implemented for the sphere only, got k={form.k}", d=form.d, k=form.k)


def dyadic_cutoff(level):
    """``Λ = 2^j`` with ``2^{j-1} <= λ < 2^j``."""
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    return 1 << int(level).bit_length()


def modulus_cutoff(level):
    return isqrt(dyadic_cutoff(level))


def singular_density(form, level):
    """``π^{d/2} λ^{d/2-1} / (Γ(d/2) N(λ))``; the reciprocal of the singular series for d=4."""
    require_sphere(form)
    count = count_shell(form, level)
    if count == 0:
        raise ValueError(f"level {level} is not represented by {form}")
    d = form.d
    return pi ** (d / 2) * level ** (d / 2 - 1) / (gamma(d / 2) * count)


def to_torus(xi):
    """Representatives in ``[-1/2, 1/2)^d``."""
    xi = np.asarray(xi, dtype=float)
    return xi - np.floor(xi + 0.5)


def _kloosterman_at(form, q, level, m):
    """``K(q, λ; m)`` for every row of ``m``, computed once per residue class."""
    if len(m) == 0:
        return np.zeros(0, dtype=complex)
    residues, inverse = np.unique(m % q, axis=0, return_inverse=True)
    return kloosterman_batch(form, q, level, residues)[inverse.reshape(-1)]


def _arc_terms(form, q, level, xi, localizer):
    """Contribution of modulus ``q``; ``localizer(η, q)`` multiplies the sphere factor at offset η."""
    bump = BumpPsi(form.d)
    out = np.zeros(len(xi), dtype=complex)
    m, near = RationalPoint.major_arc_centers(xi, q)
    if not np.any(near):
        return out
    m = m[near]
    eta = xi[near] - m / q
    cutoff = bump(q * eta) if localizer is None else localizer(eta, q)
    active = cutoff != 0
    if not np.any(active):
        return out
    weight = _kloosterman_at(form, q, level, m[active])
    radial = sphere_ft(form.d, sqrt(level) * np.linalg.norm(eta[active], axis=1))
    values = np.zeros(len(m), dtype=complex)
    values[active] = weight * cutoff[active] * radial
    out[near] = values
    return out


def _as_points(xi, d):
    xi = to_torus(xi)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    if xi.shape[1] != d:
        raise ValueError(f"frequencies must have {d} coordinates, got shape {xi.shape}")
    return xi, single


def main_term_multiplier(form, level, xi, normalize=True, moduli=None):
    """``M̂_λ(ξ)`` at one point or a stack of points.

    ``normalize=False`` returns the raw Kloosterman-weighted sum, whose q = 1
    term at ξ = 0 is exactly 1. ``moduli`` restricts the q-sum.
    """
    require_sphere(form)
    xi, single = _as_points(xi, form.d)
    moduli = range(1, modulus_cutoff(level) + 1) if moduli is None else moduli
    total = np.zeros(len(xi), dtype=complex)
    for q in moduli:
        total += _arc_terms(form, q, level, xi, None)
    if normalize:
        total *= singular_density(form, level)
    return total[0] if single else total


def arc_term(form, level, q, xi, normalize=False):
    """The single-modulus piece ``M̂^q_λ(ξ)``."""
    return main_term_multiplier(form, level, xi, normalize=normalize, moduli=[q])


def exact_multiplier(measure, xi):
    """``σ̂_λ(ξ)`` via the sign-flip orbits of the nonnegative shell points.

    Each orbit of ``y >= 0`` contributes ``2^{#nonzero(y)} Π cos(2π y_i ξ_i)``.
    """
    xi, single = _as_points(xi, measure.form.d)
    points = measure.points
    orthant = points[np.all(points >= 0, axis=1)]
    multiplicity = 2.0 ** np.count_nonzero(orthant, axis=1)
    radius = measure.radius
    out = np.empty(len(xi))
    chunk = max(1, 2 ** 21 // max(len(orthant), 1))
    harmonics = np.arange(radius + 1)
    for start in range(0, len(xi), chunk):
        block = xi[start:start + chunk]
        # table[n, i, v] = cos(2π v ξ_i)
        table = np.cos(2 * np.pi * block[:, :, None] * harmonics)
        product = np.ones((len(block), len(orthant)))
        for i in range(measure.form.d):
            product *= table[:, i, orthant[:, i]]
        out[start:start + chunk] = product @ multiplicity
    out /= measure.count
    return out[0] if single else out


def error_multiplier(measure, xi, normalize=True):
    """``Ê_λ = σ̂_λ - M̂_λ``."""
    return exact_multiplier(measure, xi) - main_term_multiplier(measure.form, measure.level, xi, normalize=normalize)


@dataclass
class MultiplierSample:
    level: int
    kind: str
    xi: np.ndarray
    values: np.ndarray
    cutoff: int

    @property
    def sup(self):
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0


def sample_multiplier(measure, xi, kind='error', normalize=True, tolerance=None):
    """Sample one of ``exact``, ``main`` or ``error`` at the rows of ``xi``.

    The sphere multipliers are real; an imaginary part above ``tolerance``
    raises ``NumericalDrift``.
    """
    xi, _ = _as_points(xi, measure.form.d)
    if kind == 'exact':
        values = exact_multiplier(measure, xi)
    elif kind == 'main':
        values = main_term_multiplier(measure.form, measure.level, xi, normalize=normalize)
    elif kind == 'error':
        values = error_multiplier(measure, xi, normalize=normalize)
    else:
        raise ValueError(f"unknown multiplier kind {kind!r}")
    values = np.atleast_1d(values)
    if np.iscomplexobj(values):
        if tolerance is None:
            tolerance = settings.LAB['TOLERANCES']['imag_part']
        drift = float(np.max(np.abs(values.imag))) if len(values) else 0.0
        if drift > tolerance:
            raise NumericalDrift(
                f"{kind} multiplier at lambda={measure.level} has imaginary part {drift:.3e}",
                level=measure.level, kind=kind, imag=drift, tolerance=tolerance,
            )
        values = values.real
    return MultiplierSample(measure.level, kind, xi, values, dyadic_cutoff(measure.level))


def block_moduli(level, j):
    """``2^j <= q < 2^{j+1}`` intersected with the main-term range."""
    return range(1 << j, min(1 << (j + 1), modulus_cutoff(level) + 1))


def low_high_split(form, level, j, delta, xi, normalize=False):
    """Split the block main term into ``(low, high)``.

    ``low`` replaces ``Ψ(qξ - m)`` by ``Ψ(2Δ√λ(ξ - m/q))``; for
    ``2^j <= Δ <= √λ`` that localizer sits where ``Ψ(qξ - m) = 1``.
    """
    require_sphere(form)
    if not (1 << j) <= delta <= sqrt(level):
        raise RegimeViolation(
            f"need 2^j <= delta <= sqrt(lambda), got j={j} delta={delta} lambda={level}",
            j=j, delta=delta, level=level,
        )
    xi, single = _as_points(xi, form.d)
    bump = BumpPsi(form.d)
    narrow = 2 * delta * sqrt(level)
    low = np.zeros(len(xi), dtype=complex)
    block = np.zeros(len(xi), dtype=complex)
    for q in block_moduli(level, j):
        low += _arc_terms(form, q, level, xi, lambda eta, _q: bump(narrow * eta))
        block += _arc_terms(form, q, level, xi, None)
    if normalize:
        density = singular_density(form, level)
        low *= density
        block *= density
    high = block - low
    if single:
        return low[0], high[0]
    return low, high


def high_envelope(d, level, j, delta, epsilon=0.05):
    """``2^j (Δ/2^j)^{(d-1)/2} λ^ε``."""
    return 2.0 ** j * (delta / 2.0 ** j) ** ((d - 1) / 2) * level ** epsilon

