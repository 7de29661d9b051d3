"""Closed-form exponents of the ℓ^p-improving bounds.

Every function returns an exact ``Fraction`` when its inputs are rational.
Unless a docstring says otherwise the value is a decay exponent: the bound
reads ``λ^{-value}``.
"""
from dataclasses import dataclass
from fractions import Fraction
import logging
import math

from spherelab.exceptions import BirchCriterionViolation, InvalidExponent

logger = logging.getLogger(__name__)

BIRCH_CRITERION = "d - dim V > (k-1)2^k"


def as_fraction(value):
    """Exact rational for ints, Fractions and decimal strings; floats are rounded to 10^-9."""
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        if value.lower() in ('inf', 'infinity'):
            return math.inf
        return Fraction(value)
    value = float(value)
    if math.isinf(value):
        return math.inf
    return Fraction(value).limit_denominator(10 ** 9)


def dual_exponent(p):
    """``p' = p/(p-1)``; 1 and ∞ are dual to each other."""
    p = as_fraction(p)
    if p == math.inf:
        return Fraction(1)
    if p < 1:
        raise InvalidExponent(f"exponent must be >= 1, got {p}", p=str(p))
    if p == 1:
        return math.inf
    return p / (p - 1)


def _require_range(p, low=1, high=2, what="p"):
    p = as_fraction(p)
    if p == math.inf or not low <= p <= high:
        raise InvalidExponent(f"{what} must lie in [{low}, {high}], got {p}", p=str(p), low=str(low), high=str(high))
    return p


@dataclass(frozen=True)
class BirchParameters:
    alpha: Fraction
    beta: Fraction
    gamma: Fraction
    form: object

    @property
    def hypothesis_holds(self):
        return self.alpha < self.beta


def birch_parameters(form, strict=True):
    """α = d/k - 1, β = (d-2)/k and γ = (d/((k-1)2^k) - 1)/(6k) for a diagonal form."""
    d, k = form.d, form.k
    if not form.satisfies_birch:
        if strict:
            raise BirchCriterionViolation(
                f"{form} fails the Birch criterion {BIRCH_CRITERION}: {d} <= {form.birch_threshold}",
                criterion=BIRCH_CRITERION, d=d, k=k, threshold=form.birch_threshold,
            )
        logger.warning(f"{form} fails the Birch criterion; gamma is not positive")
    alpha = Fraction(d, k) - 1
    beta = Fraction(d - 2, k)
    gamma = Fraction(1, 6 * k) * (Fraction(d, (k - 1) * 2 ** k) - 1)
    return BirchParameters(alpha, beta, gamma, form)


def interpolation_bound(alpha, beta, gamma, p):
    """Decay exponent of ``λ^{-β(2/p-1)} + λ^{-[α(2/p-1)+γ(2-2/p)]}``."""
    p = _require_range(p)
    alpha, beta, gamma = as_fraction(alpha), as_fraction(beta), as_fraction(gamma)
    if not alpha < beta:
        logger.warning(f"interpolation hypothesis alpha < beta fails: alpha={alpha} beta={beta}")
    return min(beta * (2 / p - 1), alpha * (2 / p - 1) + gamma * (2 - 2 / p))


def eta(params, p):
    return interpolation_bound(params.alpha, params.beta, params.gamma, p)


def trivial_bound_exponent(form, p):
    """Young plus interpolation: ``(d/k - 1)(2/p - 1)``, i.e. ``((d-2)/2)(2/p-1)`` on the sphere."""
    p = _require_range(p)
    return (Fraction(form.d, form.k) - 1) * (2 / p - 1)


def critical_p(d):
    """``(d+1)/(d-1)``, the smallest p covered by the improving estimate."""
    return Fraction(d + 1, d - 1)


def improving_exponent(d, p):
    """``(d/2)(2/p - 1)`` for ``(d+1)/(d-1) <= p <= 2``."""
    p = _require_range(p, critical_p(d), 2)
    return Fraction(d, 2) * (2 / p - 1)


def restricted_weak_exponent(d):
    """Power of λ in the restricted weak-type ``((d+1)/d, d+1)`` bound."""
    return Fraction(1, 2) - Fraction(d * (d - 1), 2 * (d + 1))


# names used by the operation tables in DESIGN.md
theorem_exponent = improving_exponent
corollary_exponent = restricted_weak_exponent


def restricted_weak_level_exponent(d):
    """Power of λ in ``|{A_λ 1_X > T}| <= C λ^{e} T^{-(d+1)} |X|^d``."""
    return Fraction(d + 1, 2) - Fraction(d * (d - 1), 2)


def dyadic_moduli_exponents(d, p):
    """``(θ, λ power, 2^j power)`` for one dyadic block of moduli, with ``1/p = θ + (1-θ)/2``.

    Interpolates ``2^{2j} λ^{-d/2}`` (ℓ^1 → ℓ^∞) against ``2^{j(3-d)/2}`` (ℓ^2).
    """
    p = _require_range(p)
    theta = 2 / p - 1
    return theta, -Fraction(d, 2) * theta, theta * Fraction(d + 1, 2) + Fraction(3 - d, 2)


def error_term_exponent(d, p):
    """Power of λ in the ℓ^p → ℓ^{p'} error-term bound, ``1/2 - (d-1)/(2p)``."""
    p = _require_range(p)
    return Fraction(1, 2) - (d - 1) / (2 * p)


FULL_DECAY_ESTIMATES = ('gauss', 'weyl', 'steckin')


def full_decay_threshold(form, estimate='gauss'):
    """Lower end of the p-range in which the full decay holds without an ε-loss."""
    d, k = form.d, form.k
    if estimate == 'gauss':
        if k != 2 or d < 5:
            raise InvalidExponent(f"the Gauss estimate needs k=2 and d>=5, got {form}", d=d, k=k)
        return Fraction(d, d - 2)
    if estimate == 'weyl':
        denominator = d - 2 ** k
    elif estimate == 'steckin':
        denominator = d - k
    else:
        raise ValueError(f"unknown estimate {estimate!r}; expected one of {FULL_DECAY_ESTIMATES}")
    if denominator <= 0:
        raise InvalidExponent(f"the {estimate} estimate gives no range for {form}", d=d, k=k)
    return Fraction(d, denominator)


def full_decay_exponent(form, p, estimate='gauss'):
    """``(d/k)(2/p - 1)`` for ``threshold < p <= 2``."""
    threshold = full_decay_threshold(form, estimate)
    p = _require_range(p)
    if p <= threshold:
        raise InvalidExponent(f"{estimate} range is p > {threshold}, got {p}", p=str(p), threshold=str(threshold))
    return Fraction(form.d, form.k) * (2 / p - 1)


def dyadic_maximal_exponent(d, p):
    """``min{((d-2)/2)(2/p-1), ((d-3)/4)(2-2/p)}``, the decay of the dyadic maximal function."""
    p = _require_range(p)
    return min(Fraction(d - 2, 2) * (2 / p - 1), Fraction(d - 3, 4) * (2 - 2 / p))


def young_baseline(size, p):
    """``S^{1-2/p}``: Young's ℓ^p → ℓ^{p'} bound ``‖μ‖_r`` (``1/r = 2 - 2/p``) for a normalized measure on S points."""
    if int(size) != size or size < 1:
        raise ValueError(f"support size must be a positive integer, got {size}")
    p = _require_range(p)
    return float(size) ** float(1 - 2 / p)


def trivial_bound_value(form, level, p, constant=100):
    """``constant · λ^{-trivial exponent}``."""
    return constant * float(level) ** -float(trivial_bound_exponent(form, p))


def exponent_table(form, p):
    """Every closed-form exponent that applies to ``(form, p)``, keyed by name."""
    p = as_fraction(p)
    d = form.d
    table = {
        'trivial': trivial_bound_exponent(form, p),
        'critical_p': critical_p(d),
        'restricted_weak': restricted_weak_exponent(d),
        'restricted_weak_level': restricted_weak_level_exponent(d),
        'error_term': error_term_exponent(d, p),
        'dyadic_maximal': dyadic_maximal_exponent(d, p),
    }
    if p >= critical_p(d):
        table['improving'] = improving_exponent(d, p)
    params = birch_parameters(form, strict=False)
    table['eta'] = eta(params, p)
    theta, level_power, block_power = dyadic_moduli_exponents(d, p)
    table.update(theta=theta, moduli_level_power=level_power, moduli_block_power=block_power)
    for estimate in FULL_DECAY_ESTIMATES:
        try:
            table[f'full_decay_{estimate}'] = full_decay_exponent(form, p, estimate)
        except InvalidExponent:
            continue
    return table
