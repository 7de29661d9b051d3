"""The averaging operators ``A_λ f = f * σ_λ`` and their ℓ^p norms.

Two convolution paths share one contract: a sparse path summing shifted
copies (or scattering the shell around each support point) and a dense path
through the FFT. Without ``torus`` the output box is the input box enlarged
by the shell radius on each side, so nothing wraps and the result is the
Z^d convolution restricted to where it can be nonzero.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np
from django.conf import settings
from scipy import fft

from arith_sums.sums import e
from lattice_shells.shells import count_table, enumerate_shell
from spherelab.concurrency import map_ordered
from spherelab.exceptions import BoxTooLarge, InvalidExponent
from .grid import GridFunction

logger = logging.getLogger(__name__)

# shell points handled per task in the sparse path
CHUNK = 4096


@dataclass
class ArithmeticMeasure:
    """Uniform probability measure on a full-mode shell."""
    shell: object

    def __post_init__(self):
        if not self.shell.is_full:
            raise ValueError("the arithmetic measure needs the shell points")
        if self.shell.count == 0:
            raise ValueError(f"level {self.shell.level} is not represented by {self.shell.form}")

    @classmethod
    def for_level(cls, form, level, cache=None, max_points=None):
        if max_points is None:
            max_points = settings.LAB['MAX_SHELL_POINTS']
        if cache is None:
            return cls(enumerate_shell(form, level, max_points=max_points))
        return cls(cache.shell(form, level, max_points=max_points))

    @property
    def form(self):
        return self.shell.form

    @property
    def level(self):
        return self.shell.level

    @property
    def points(self):
        return self.shell.points

    @property
    def count(self):
        return self.shell.count

    @property
    def weight(self):
        return 1.0 / self.count

    @property
    def radius(self):
        return self.shell.radius

    def rasterize(self, M, dtype=float):
        """The measure on Z_M^d; shell points that alias onto one cell add up."""
        grid = np.zeros((M,) * self.form.d, dtype=dtype)
        np.add.at(grid, tuple((self.points % M).T), self.weight)
        return grid


def _check_cells(side, d, what):
    cells = side ** d
    if cells > settings.LAB['MAX_CELLS']:
        raise BoxTooLarge(
            f"{what} needs a box of side {side} ({cells} cells), budget is {settings.LAB['MAX_CELLS']}",
            side=side, d=d, cells=cells, budget=settings.LAB['MAX_CELLS'],
        )


def _output_box(f, measure, torus):
    if f.d != measure.form.d:
        raise ValueError(f"grid has d={f.d}, measure has d={measure.form.d}")
    if torus:
        return f.M, f.offset, 0
    r = measure.radius
    side = f.M + 2 * r
    _check_cells(side, f.d, f"averaging at lambda={measure.level}")
    return side, f.offset - r, r


def _shift_chunk(f, points, side, r, torus):
    out = np.zeros((side,) * f.d, dtype=f.values.dtype)
    for y in points:
        if torus:
            out += np.roll(f.values, shift=tuple(y), axis=tuple(range(f.d)))
        else:
            out[tuple(slice(r + c, r + c + f.M) for c in y)] += f.values
    return out


def _scatter_chunk(f, support, points, side, r, torus):
    out = np.zeros((side,) * f.d, dtype=f.values.dtype)
    weights = f.values[tuple(support.T)]
    for index, value in zip(support, weights):
        targets = index + r + points
        if torus:
            targets %= side
        np.add.at(out, tuple(targets.T), value)
    return out


def average(f, measure, torus=False):
    """``A_λ f`` by exact sparse accumulation.

    Loops over whichever is smaller, the shell or the support of ``f``. Work
    is split into fixed chunks whose partial sums are added in chunk order,
    so the result does not depend on the worker count.
    """
    side, offset, r = _output_box(f, measure, torus)
    support = f.support()
    points = measure.points
    if len(support) == 0:
        return GridFunction(np.zeros((side,) * f.d, dtype=f.values.dtype), offset)

    if len(support) < len(points):
        chunks = [support[i:i + CHUNK] for i in range(0, len(support), CHUNK)]
        partials = map_ordered(lambda s: _scatter_chunk(f, s, points, side, r, torus), chunks)
    else:
        chunks = [points[i:i + CHUNK] for i in range(0, len(points), CHUNK)]
        partials = map_ordered(lambda p: _shift_chunk(f, p, side, r, torus), chunks)
    out = partials[0]
    for partial in partials[1:]:
        out += partial
    return GridFunction(out / measure.count, offset)


def average_support(f, measure):
    """``A_λ f`` on the union of shell translates of ``supp f``, without a box.

    Returns ``(coordinates, values)`` with coordinates in lexicographic order.
    Suited to sparse inputs at levels whose enlarged box would not fit.
    """
    support = f.support()
    if len(support) == 0:
        return np.zeros((0, f.d), dtype=np.int64), np.zeros(0, dtype=f.values.dtype)
    weights = f.values[tuple(support.T)]
    targets = ((support + f.offset)[:, None, :] + measure.points[None, :, :]).reshape(-1, f.d)
    coordinates, inverse = np.unique(targets, axis=0, return_inverse=True)
    repeated = np.repeat(weights, measure.count)
    inverse = inverse.reshape(-1)
    if np.iscomplexobj(repeated):
        values = np.bincount(inverse, repeated.real) + 1j * np.bincount(inverse, repeated.imag)
    else:
        values = np.bincount(inverse, repeated)
    return coordinates, values / measure.count


class ConvolutionPlan:
    """Cached transform of the rasterized measure on Z_M^d, for repeated dense application."""

    def __init__(self, measure, M):
        _check_cells(M, measure.form.d, f"dense plan at lambda={measure.level}")
        self.measure = measure
        self.M = M
        self.shape = (M,) * measure.form.d
        self.workers = settings.LAB['FFT_WORKERS']
        kernel = measure.rasterize(M)
        self._real = fft.rfftn(kernel, workers=self.workers)
        self._full = None

    def apply(self, values):
        """Circular convolution of an ``(M,)*d`` array with the measure."""
        if values.shape != self.shape:
            raise ValueError(f"plan is for shape {self.shape}, got {values.shape}")
        if np.iscomplexobj(values):
            if self._full is None:
                self._full = fft.fftn(self.measure.rasterize(self.M), workers=self.workers)
            return fft.ifftn(fft.fftn(values, workers=self.workers) * self._full, workers=self.workers)
        transformed = fft.rfftn(values, workers=self.workers) * self._real
        return fft.irfftn(transformed, s=self.shape, workers=self.workers)


def average_fft(f, measure, M=None, torus=False, plan=None):
    """``A_λ f`` as a circular convolution on Z_M^d.

    Without ``torus`` the grid is embedded at offset ``f.offset - r`` in a box
    of side ``M >= f.M + 2r`` so the result equals the Z^d convolution.
    """
    r = measure.radius
    if torus:
        M = f.M if M is None else M
        if M != f.M:
            raise ValueError(f"torus mode uses the grid's own box (M={f.M}), got M={M}")
        g = f
    else:
        M = f.M + 2 * r if M is None else M
        if M < f.M + 2 * r:
            raise ValueError(f"M={M} wraps around; need M >= {f.M + 2 * r}")
        g = f.embed(M, f.offset - r)
    plan = plan if plan is not None and plan.M == M else ConvolutionPlan(measure, M)
    return GridFunction(plan.apply(g.values), g.offset)


def average_auto(f, measure, torus=False):
    """Sparse path when ``N·|supp f| < M^d log M^d`` for the output side ``M``, dense otherwise."""
    side = f.M if torus else f.M + 2 * measure.radius
    cells = side ** f.d
    work = measure.count * max(len(f.support()), 1)
    if work < cells * math.log(max(cells, 2)):
        return average(f, measure, torus=torus)
    return average_fft(f, measure, torus=torus)


def maximal(f, levels, form=None, cache=None):
    """Pointwise ``sup_λ |A_λ f|`` over ``levels`` (levels or measures).

    ``f`` is padded by the largest shell radius and every average is taken on
    that torus, which cannot wrap for the padded support.
    """
    measures = [
        level if isinstance(level, ArithmeticMeasure) else ArithmeticMeasure.for_level(form, level, cache=cache)
        for level in levels
    ]
    if not measures:
        raise ValueError("maximal needs at least one level")
    padded = f.pad(max(m.radius for m in measures))
    _check_cells(padded.M, f.d, "maximal average")
    sup = np.zeros(padded.values.shape)
    for measure in measures:
        np.maximum(sup, np.abs(average_auto(padded, measure, torus=True).values), out=sup)
    logger.info(f"maximal average over {len(measures)} levels on side {padded.M}")
    return GridFunction(sup, padded.offset)


def dyadic_levels(form, base, odd_only=False):
    """Represented levels ``λ`` in ``[base, 2·base)``, optionally odd only."""
    if base < 1:
        raise ValueError(f"dyadic base must be >= 1, got {base}")
    table = count_table(form, 2 * base - 1)
    return [
        level for level in range(base, 2 * base)
        if table[level] > 0 and (not odd_only or level % 2 == 1)
    ]


def lp_norm(f, p):
    """Counting-measure ``ℓ^p`` norm; ``p = inf`` gives the max modulus."""
    values = np.abs(f.values if isinstance(f, GridFunction) else np.asarray(f)).ravel()
    p = float(p)
    if math.isnan(p) or p < 1:
        raise InvalidExponent(f"l^p norms need p >= 1, got {p}", p=p)
    if values.size == 0:
        return 0.0
    top = float(values.max())
    if math.isinf(p) or top == 0.0:
        return top
    return top * float(np.sum((values / top) ** p)) ** (1.0 / p)


def sigma_hat(measure, xi):
    """``σ̂_λ(ξ) = N^{-1} Σ_y e(-y·ξ)`` by direct summation; ``xi`` is one point or a stack."""
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    points = measure.points.astype(float)
    out = np.empty(len(xi), dtype=complex)
    chunk = max(1, 2 ** 22 // measure.count)
    for start in range(0, len(xi), chunk):
        block = xi[start:start + chunk]
        out[start:start + chunk] = e(-(block @ points.T)).sum(axis=1) / measure.count
    return out[0] if single else out
