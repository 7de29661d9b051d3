"""Sampled sup-norm estimates of the error multiplier ``Ê_λ = σ̂_λ - M̂_λ``.

Both multipliers are invariant under coordinate sign flips and permutations,
so every sample lives in the fundamental domain ``1/2 >= ξ_1 >= ... >= ξ_d >= 0``.
Reported values are maxima over evaluated points, hence lower bounds on the
true sup norm.
"""
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb, gcd
import logging

import numpy as np
from django.conf import settings

from spherelab.concurrency import map_ordered
from spherelab.exceptions import SampleBudgetExceeded
from .multipliers import dyadic_cutoff, error_multiplier, modulus_cutoff

logger = logging.getLogger(__name__)

CHUNK = 8192


def fold(xi):
    """Map torus points into the fundamental domain."""
    xi = np.abs(np.asarray(xi, dtype=float) - np.floor(np.asarray(xi, dtype=float) + 0.5))
    return -np.sort(-xi, axis=-1)


def grid_samples(d, resolution):
    """Points ``k/(2G)`` with nonincreasing coordinates."""
    steps = np.arange(resolution + 1) / (2 * resolution)
    return np.array([[steps[i] for i in reversed(c)] for c in combinations_with_replacement(range(resolution + 1), d)])


def grid_size(d, resolution):
    return comb(resolution + d, d)


def rational_samples(d, level, per_modulus=64, rng=None):
    """Reduced rationals ``m/q`` (q up to the main-term cutoff), plus points at the arc edges.

    Offsets ``c/(8q)`` for ``c`` in ``{1, 1.5, 2}`` along random directions
    probe where ``Ψ(qξ - m)`` switches off.
    """
    rng = np.random.default_rng(rng)
    out = []
    for q in range(1, modulus_cutoff(level) + 1):
        numerators = rng.integers(0, q // 2 + 1, size=(per_modulus, d))
        numerators = numerators[[gcd(q, *map(int, row)) == 1 for row in numerators]]
        if len(numerators) == 0:
            continue
        centers = numerators / q
        out.append(centers)
        for scale in (1.0, 1.5, 2.0):
            direction = rng.standard_normal(centers.shape)
            direction /= np.abs(direction).max(axis=1, keepdims=True)
            out.append(centers + scale / (8 * q) * direction)
    return fold(np.vstack(out)) if out else np.zeros((0, d))


@dataclass
class ErrorScan:
    level: int
    cutoff: int
    seed: int
    samples: int = 0
    sup_estimate: float = 0.0
    argmax_xi: np.ndarray = None
    history: list = field(default_factory=list)

    def absorb(self, xi, values, stage):
        self.samples += len(xi)
        if len(values):
            best = int(np.argmax(values))
            if values[best] > self.sup_estimate:
                self.sup_estimate = float(values[best])
                self.argmax_xi = np.asarray(xi[best], dtype=float)
        self.history.append((stage, self.samples, self.sup_estimate))

    def report(self):
        return {
            'lambda': self.level,
            'cutoff': self.cutoff,
            'sup_estimate': self.sup_estimate,
            'argmax_xi': [float(c) for c in self.argmax_xi] if self.argmax_xi is not None else None,
            'samples': self.samples,
            'seed': self.seed,
        }


def _evaluate(measure, xi, normalize):
    chunks = [xi[i:i + CHUNK] for i in range(0, len(xi), CHUNK)]
    parts = map_ordered(lambda block: np.abs(error_multiplier(measure, block, normalize=normalize)), chunks)
    return np.concatenate(parts) if parts else np.zeros(0)


def error_multiplier_scan(measure, resolution=8, random_samples=20000, seed=0, budget=None,
                          refine=16, refine_rounds=6, normalize=True):
    """Lower bound on ``sup |Ê_λ|`` from grid, random and rational samples, then local refinement.

    Refinement runs coordinate descent from the ``refine`` best samples with
    step sizes halving from ``1/(4G)``; the running maximum never decreases.
    """
    budget = settings.LAB['SAMPLE_BUDGET'] if budget is None else budget
    d = measure.form.d
    rng = np.random.default_rng(seed)
    planned = grid_size(d, resolution) + random_samples
    if planned > budget:
        raise SampleBudgetExceeded(
            f"{planned} planned samples exceed the budget of {budget}",
            planned=planned, budget=budget, level=measure.level,
        )
    scan = ErrorScan(measure.level, dyadic_cutoff(measure.level), seed)

    stages = [
        ('grid', grid_samples(d, resolution)),
        ('random', fold(rng.random((random_samples, d)) - 0.5)),
        ('rational', rational_samples(d, measure.level, rng=rng)),
    ]
    pool_xi, pool_values = [], []
    for stage, xi in stages:
        xi = xi[:max(budget - scan.samples, 0)]
        values = _evaluate(measure, xi, normalize)
        scan.absorb(xi, values, stage)
        pool_xi.append(xi)
        pool_values.append(values)

    xi_all = np.vstack(pool_xi)
    values_all = np.concatenate(pool_values)
    order = np.argsort(-values_all, kind='stable')[:refine]
    starts, current = xi_all[order], values_all[order]
    step = 1 / (4 * resolution)
    for _ in range(refine_rounds):
        if scan.samples + 2 * d * len(starts) > budget:
            logger.warning(f"error scan lambda={measure.level}: budget reached during refinement")
            break
        moves = np.concatenate([starts + sign * step * np.eye(d)[i] for i in range(d) for sign in (1, -1)])
        moves = fold(moves)
        values = _evaluate(measure, moves, normalize)
        scan.absorb(moves, values, f"refine {step:.3g}")
        candidates = values.reshape(2 * d, len(starts))
        best = candidates.argmax(axis=0)
        improved = candidates[best, np.arange(len(starts))] > current
        chosen = moves.reshape(2 * d, len(starts), d)[best, np.arange(len(starts))]
        starts = np.where(improved[:, None], chosen, starts)
        current = np.where(improved, candidates[best, np.arange(len(starts))], current)
        step /= 2

    logger.info(
        f"error scan lambda={measure.level} cutoff={scan.cutoff}: sup >= {scan.sup_estimate:.4e} "
        f"from {scan.samples} samples"
    )
    return scan
