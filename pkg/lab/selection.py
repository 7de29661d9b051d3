"""Level selections.

Accepted forms::

    25                      a single level
    1,5,9                   an explicit list
    odd:49..401/8           a range, optionally filtered by parity and thinned
                            to n log-spaced members (prefix all:, odd: or even:)
    dyadic:5:odd            the block [2^5, 2^6), optionally odd only

Ranges and blocks keep only levels the form represents.
"""
import re

import numpy as np

from lattice_shells.shells import count_table
from spherelab.exceptions import ConfigError

RANGE = re.compile(r"^(?:(?P<parity>all|odd|even):)?(?P<low>\d+)\.\.(?P<high>\d+)(?:/(?P<n>\d+))?$")
DYADIC = re.compile(r"^dyadic:(?P<j>\d+)(?::(?P<parity>odd|even|all))?$")
LIST = re.compile(r"^\d+(?:,\d+)*$")


def _parity(levels, parity):
    if parity == 'odd':
        return [level for level in levels if level % 2 == 1]
    if parity == 'even':
        return [level for level in levels if level % 2 == 0]
    return levels


def _represented(form, low, high):
    table = count_table(form, high)
    return [level for level in range(max(low, 1), high + 1) if table[level] > 0]


def log_spaced(levels, n):
    """``n`` members of ``levels`` nearest to log-spaced targets, without repeats."""
    if n >= len(levels) or n < 1:
        return levels
    values = np.asarray(levels, dtype=float)
    targets = np.geomspace(values[0], values[-1], n)
    picked = sorted({int(np.argmin(np.abs(np.log(values) - np.log(t)))) for t in targets})
    return [levels[i] for i in picked]


def parse_levels(text, form):
    text = str(text).strip().replace(' ', '')
    if not text:
        raise ConfigError("empty lambda selection")
    if LIST.match(text):
        levels = sorted({int(part) for part in text.split(',')})
        if levels[0] < 1:
            raise ConfigError(f"levels must be >= 1, got {levels[0]}", selection=text)
        return levels
    match = RANGE.match(text)
    if match:
        low, high = int(match['low']), int(match['high'])
        if low > high:
            raise ConfigError(f"empty range {low}..{high}", selection=text)
        levels = _parity(_represented(form, low, high), match['parity'])
        if match['n']:
            levels = log_spaced(levels, int(match['n']))
        return levels
    match = DYADIC.match(text)
    if match:
        j = int(match['j'])
        return _parity(_represented(form, 1 << j, (1 << (j + 1)) - 1), match['parity'])
    raise ConfigError(
        f"cannot parse lambda selection {text!r}; use 25, 1,5,9, odd:a..b[/n] or dyadic:j[:odd]",
        selection=text,
    )
