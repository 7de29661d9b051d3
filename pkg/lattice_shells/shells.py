"""Lattice points on the level sets ``F(y) = λ`` of a diagonal form ``F(y) = Σ|y_i|^k``."""
from dataclasses import dataclass
from functools import lru_cache
import logging

import numpy as np
from sympy import divisors, integer_nthroot

from spherelab.exceptions import InvalidForm, ShellBudgetExceeded

logger = logging.getLogger(__name__)

# Above this many candidate vectors a 64-bit count accumulator could overflow.
_INT64_SAFE = 2 ** 62


@dataclass(frozen=True)
class DiagonalForm:
    d: int
    k: int = 2

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise InvalidForm(f"dimension must be an integer >= 2, got {self.d}", d=self.d, k=self.k)
        if int(self.k) != self.k or self.k < 2:
            raise InvalidForm(f"degree must be an integer >= 2, got {self.k}", d=self.d, k=self.k)

    def __call__(self, y):
        y = np.asarray(y)
        return np.sum(np.abs(y) ** self.k, axis=-1)

    def __str__(self):
        return f"d={self.d} k={self.k}"

    @property
    def is_sphere(self):
        return self.k == 2

    @property
    def birch_threshold(self):
        # d - dim V_F(C) > (k-1) 2^k, and dim V_F(C) = 0 for diagonal forms
        return (self.k - 1) * 2 ** self.k

    @property
    def satisfies_birch(self):
        return self.d > self.birch_threshold

    def radius(self, level):
        """Largest integer ``x`` with ``x^k <= level``."""
        if level < 0:
            return -1
        return int(integer_nthroot(int(level), self.k)[0])

    def value(self, y):
        """Exact integer ``F(y)``."""
        return sum(abs(int(c)) ** self.k for c in y)


@dataclass
class SphereShell:
    form: DiagonalForm
    level: int
    count: int
    points: np.ndarray = None

    @property
    def is_full(self):
        return self.points is not None

    @property
    def radius(self):
        return self.form.radius(self.level)

    def __len__(self):
        return self.count

    def is_symmetric(self):
        """Closed under sign flips and coordinate permutations (full mode only)."""
        if not self.is_full:
            return True
        members = {tuple(row) for row in self.points.tolist()}
        for axis in range(self.form.d):
            flipped = self.points.copy()
            flipped[:, axis] *= -1
            if {tuple(row) for row in flipped.tolist()} != members:
                return False
        # adjacent transpositions generate every permutation
        for axis in range(self.form.d - 1):
            swapped = self.points.copy()
            swapped[:, [axis, axis + 1]] = swapped[:, [axis + 1, axis]]
            if {tuple(row) for row in swapped.tolist()} != members:
                return False
        return True

    def describe(self):
        return f"form {self.form} lambda={self.level} count={self.count}"


def _needs_wide_counts(form, level):
    side = 2 * form.radius(level) + 1
    return side ** form.d >= _INT64_SAFE


def one_dimensional_counts(form, level_max):
    """``r_1(j) = #{x in Z : |x|^k = j}`` for ``0 <= j <= level_max``."""
    counts = np.zeros(level_max + 1, dtype=np.int64)
    for x in range(form.radius(level_max) + 1):
        counts[x ** form.k] += 1 if x == 0 else 2
    return counts


@lru_cache(maxsize=32)
def _count_table(form, level_max):
    base = one_dimensional_counts(form, level_max)
    dtype = object if _needs_wide_counts(form, level_max) else np.int64
    base = base.astype(dtype)
    table = base.copy()
    steps = [(x ** form.k, 2 if x else 1) for x in range(form.radius(level_max) + 1)]
    for _ in range(form.d - 1):
        extended = np.zeros_like(table)
        for shift, weight in steps:
            extended[shift:] += weight * table[:level_max + 1 - shift]
        table = extended
    table.flags.writeable = False
    return table


def count_table(form, level_max):
    """``N_F(λ)`` for every ``0 <= λ <= level_max`` by d-fold convolution of the 1-D counts."""
    if level_max < 0:
        raise ValueError(f"level_max must be nonnegative, got {level_max}")
    table = _count_table(form, int(level_max))
    logger.debug(f"count table for {form} up to {level_max} ({table.dtype})")
    return table


def count_shell(form, level):
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    return int(count_table(form, level)[level])


def enumerate_shell(form, level, max_points=None):
    """All integer solutions of ``F(y) = level`` in lexicographic order.

    Coordinates are fixed one at a time, dropping prefixes whose partial sum
    already exceeds ``level``; the last coordinate is solved exactly from the
    remaining budget. Raises ``ShellBudgetExceeded`` carrying the count when
    the shell would exceed ``max_points``.
    """
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    count = count_shell(form, level)
    if max_points is not None and count > max_points:
        raise ShellBudgetExceeded(
            f"shell {form} lambda={level} has {count} points, cap is {max_points}; use count mode",
            count=count, cap=max_points, d=form.d, k=form.k, level=level,
        )

    radius = form.radius(level)
    values = np.arange(-radius, radius + 1, dtype=np.int64)
    powers = np.abs(values) ** form.k

    prefixes = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros(1, dtype=np.int64)
    for _ in range(form.d - 1):
        rows, cols = np.nonzero(powers[None, :] <= (level - used)[:, None])
        prefixes = np.column_stack([prefixes[rows], values[cols]])
        used = used[rows] + powers[cols]

    root_of = np.full(level + 1, -1, dtype=np.int64)
    root_of[np.arange(radius + 1, dtype=np.int64) ** form.k] = np.arange(radius + 1, dtype=np.int64)
    last = root_of[level - used]
    solved = last >= 0
    prefixes, last = prefixes[solved], last[solved]
    nonzero = last > 0
    points = np.vstack([
        np.column_stack([prefixes, last]),
        np.column_stack([prefixes[nonzero], -last[nonzero]]),
    ])
    points = points[np.lexsort(points.T[::-1])]

    if len(points) != count:
        raise AssertionError(f"enumeration found {len(points)} points, count table says {count}")
    logger.info(f"enumerated shell {form} lambda={level}: {count} points")
    return SphereShell(form=form, level=int(level), count=count, points=points)


def four_square_count(level):
    """Jacobi: ``r_4(n) = 8 Σ_{m | n, 4 ∤ m} m``; equals ``8σ(n)`` for odd ``n``."""
    if level < 0:
        return 0
    if level == 0:
        return 1
    return 8 * sum(m for m in divisors(level) if m % 4)


def expected_order(form, level):
    return float(level) ** (form.d / form.k - 1)


def within_count_bound(form, level, count, constant=100):
    """Exact check of ``λ^{(d-2)/2}/C <= N <= C λ^{(d-2)/2}`` (squared to stay in integers)."""
    scale = level ** (form.d - 2)
    return (constant * count) ** 2 >= scale and count ** 2 <= constant ** 2 * scale


def count_bound_applies(form, level):
    if not form.is_sphere:
        return False
    if form.d >= 5:
        return True
    return form.d == 4 and level % 2 == 1


@dataclass(frozen=True)
class RegularValue:
    level: int
    count: int
    within_bound: bool = None
    expected: float = None


def regular_values(form, level_max, constant=100):
    """Levels ``1 <= λ <= level_max`` with ``N_F(λ) > 0``.

    For spheres in the range where the two-sided count bound is claimed
    (d >= 5, or d = 4 with odd λ) each level carries ``within_bound``;
    violations are logged and reported, never raised.
    """
    if level_max < 1:
        raise ValueError(f"level_max must be >= 1, got {level_max}")
    table = count_table(form, level_max)
    found = []
    violations = 0
    for level in range(1, level_max + 1):
        count = int(table[level])
        if count == 0:
            continue
        flag = None
        if count_bound_applies(form, level):
            flag = within_count_bound(form, level, count, constant)
            if not flag:
                violations += 1
                logger.warning(f"count bound violated for {form} lambda={level}: N={count}")
        found.append(RegularValue(level, count, flag, expected_order(form, level)))
    logger.info(f"regular values for {form} up to {level_max}: {len(found)} levels, {violations} bound violations")
    return found
