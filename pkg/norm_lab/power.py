"""Nonlinear power iteration for ``‖A_λ‖_{ℓ^p → ℓ^q}`` of the positive averaging operator.

Each step applies ``A_λ``, the dual nonlinearity ``t ↦ t^{q-1}``, the adjoint
(``A_λ`` again, the shell being symmetric) and ``t ↦ t^{p'-1}``. Only the
achieved ratios ``‖A f‖_q / ‖f‖_p`` are reported, so the running maximum is a
lower bound whether or not the iteration converges.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from operators.averages import ArithmeticMeasure, ConvolutionPlan, lp_norm
from spherelab.exceptions import InvalidExponent
from .exponents import as_fraction, dual_exponent
from .probes import ceil_sqrt, delta_ratio

logger = logging.getLogger(__name__)


@dataclass
class PowerIterationResult:
    level: int
    p: object
    q: object
    estimate: float
    history: list = field(default_factory=list)
    iters: int = 0
    status: str = 'converged'
    seed: str = None
    M: int = None

    @property
    def converged(self):
        return self.status in ('converged', 'closed_form')


class _WindowOperator:
    """``A_λ`` restricted to functions on a cube of radius ``R``, evaluated without wrap-around."""

    def __init__(self, measure, radius, torus=False, M=None):
        d = measure.form.d
        r = measure.radius
        if torus:
            self.M = M or 2 * radius + 1
            self.window = (slice(None),) * d
        else:
            side = 2 * radius + 1
            self.M = side + 2 * r
            self.window = (slice(r, r + side),) * d
        self.plan = ConvolutionPlan(measure, self.M)
        self.shape = (self.M,) * d

    def restrict(self, values):
        out = np.zeros(self.shape)
        out[self.window] = values[self.window]
        return out

    def apply(self, values):
        return np.clip(self.plan.apply(values), 0.0, None)

    def centre(self):
        return tuple(s.start + (s.stop - s.start) // 2 if s.start is not None else self.M // 2 for s in self.window)


def _seeds(operator, level, rng):
    d = len(operator.shape)
    delta = np.zeros(operator.shape)
    delta[operator.centre()] = 1.0
    radius = ceil_sqrt(level)
    axes = np.indices(operator.shape) - np.array(operator.centre()).reshape((d,) + (1,) * d)
    ball = operator.restrict((np.sum(axes ** 2, axis=0) <= radius * radius).astype(float))
    noise = operator.restrict(np.abs(rng.standard_normal(operator.shape)))
    return {'delta': delta, 'ball': ball, 'noise': noise}


def _ratio(operator, f, p, q):
    return lp_norm(operator.apply(f), q) / lp_norm(f, p)


def power_iteration_lower_bound(form, level, p, q=None, radius=None, max_iters=50, rel_tol=1e-6,
                                seed=0, torus=False, M=None, cache=None):
    """Lower bound on the ``p → q`` norm, ``1 <= p <= 2 <= q <= ∞``.

    The input lives on the cube of radius ``radius`` (default ``⌈√λ⌉``) inside a
    box of side ``2⌈√λ⌉ + 2R + 1``; with ``torus=True`` the whole periodic box
    of side ``M`` is used instead. ``p = 1`` and ``q = ∞`` are solved exactly.
    """
    p = as_fraction(p)
    q = dual_exponent(p) if q is None else as_fraction(q)
    if p == math.inf or p < 1 or p > 2 or q < 2:
        raise InvalidExponent(f"power iteration needs 1 <= p <= 2 <= q, got p={p} q={q}", p=str(p), q=str(q))
    measure = ArithmeticMeasure.for_level(form, level, cache=cache)

    if p == 1 or q == math.inf:
        # every column of A is a translate of the measure: the norms are ‖σ‖_q and ‖σ‖_{p'}
        value = delta_ratio(measure.count, q if p == 1 else dual_exponent(p))
        logger.info(f"power iteration lambda={level} p={p} q={q}: closed form {value:.6e}")
        return PowerIterationResult(level, p, q, value, [value], 0, 'closed_form', 'delta')

    radius = ceil_sqrt(level) if radius is None else radius
    operator = _WindowOperator(measure, radius, torus=torus, M=M)
    pf, qf, dual_p = float(p), float(q), float(dual_exponent(p))
    rng = np.random.default_rng(seed)

    seeds = _seeds(operator, level, rng)
    ratios = {name: _ratio(operator, f, pf, qf) for name, f in seeds.items()}
    best_seed = max(ratios, key=ratios.get)
    f = seeds[best_seed] / lp_norm(seeds[best_seed], pf)
    result = PowerIterationResult(level, p, q, max(ratios.values()), seed=best_seed, M=operator.M)
    result.history.append(result.estimate)
    previous = ratios[best_seed]
    result.status = 'max_iters'

    for iteration in range(1, max_iters + 1):
        g = operator.apply(f)
        h = operator.restrict(operator.apply(g ** (qf - 1)))
        if not np.any(h > 0):
            result.status = 'degenerate'
            break
        f = h ** (dual_p - 1)
        f /= lp_norm(f, pf)
        ratio = _ratio(operator, f, pf, qf)
        result.estimate = max(result.estimate, ratio)
        result.history.append(result.estimate)
        result.iters = iteration
        if abs(ratio - previous) <= rel_tol * abs(ratio):
            result.status = 'converged'
            break
        previous = ratio

    if result.status != 'converged':
        logger.warning(
            f"power iteration lambda={level} p={p} q={q} stopped ({result.status}) after {result.iters} steps; "
            f"estimate {result.estimate:.6e} is still a lower bound"
        )
    else:
        logger.info(f"power iteration lambda={level} p={p} q={q}: {result.estimate:.6e} in {result.iters} steps")
    return result
