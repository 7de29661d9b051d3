"""On-disk shell cache: ``shell_d<d>_k<k>_l<λ>.txt`` under ``LAB['CACHE_DIR']``."""
from pathlib import Path
import logging
import os
import re

import numpy as np
from django.conf import settings

from .shells import DiagonalForm, SphereShell, count_shell, enumerate_shell

logger = logging.getLogger(__name__)

HEADER = re.compile(r"^form d=(\d+) k=(\d+) lambda=(\d+) count=(\d+)$")


class ShellCache:
    """Count-only entries hold the header alone; full entries add one point per line."""

    def __init__(self, directory=None):
        self.directory = Path(directory or settings.LAB['CACHE_DIR'])
        self.hits = 0
        self.misses = 0

    def path(self, form, level):
        return self.directory / f"shell_d{form.d}_k{form.k}_l{level}.txt"

    def _read(self, path):
        with open(path) as fh:
            header = fh.readline().strip()
            match = HEADER.match(header)
            if match is None:
                raise ValueError(f"bad cache header in {path}: {header!r}")
            d, k, level, count = (int(g) for g in match.groups())
            body = fh.read().strip()
        points = None
        if body:
            points = np.loadtxt(body.splitlines(), dtype=np.int64, ndmin=2)
            if points.shape != (count, d):
                raise ValueError(f"cache {path} lists {points.shape[0]} points, header says {count}")
        elif count == 0:
            points = np.zeros((0, d), dtype=np.int64)
        return SphereShell(form=DiagonalForm(d, k), level=level, count=count, points=points)

    def load(self, form, level, full=True):
        path = self.path(form, level)
        if not path.exists():
            return None
        try:
            shell = self._read(path)
        except (OSError, ValueError) as e:
            logger.warning(f"ignoring unreadable shell cache {path}: {e}")
            return None
        if full and not shell.is_full:
            return None
        return shell

    def store(self, shell):
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path(shell.form, shell.level)
        existing = self.load(shell.form, shell.level, full=True)
        if existing is not None and not shell.is_full:
            return path
        tmp = path.with_suffix('.tmp')
        with open(tmp, 'w') as fh:
            fh.write(f"form d={shell.form.d} k={shell.form.k} lambda={shell.level} count={shell.count}\n")
            if shell.is_full and len(shell.points):
                np.savetxt(fh, shell.points, fmt='%d')
        os.replace(tmp, path)
        logger.info(f"cached shell {shell.describe()} at {path}")
        return path

    def shell(self, form, level, max_points=None):
        """Full shell from cache, enumerating and storing it on a miss."""
        cached = self.load(form, level, full=True)
        if cached is not None:
            self.hits += 1
            return cached
        self.misses += 1
        shell = enumerate_shell(form, level, max_points=max_points)
        self.store(shell)
        return shell

    def count(self, form, level):
        cached = self.load(form, level, full=False)
        if cached is not None:
            self.hits += 1
            return cached.count
        self.misses += 1
        count = count_shell(form, level)
        self.store(SphereShell(form=form, level=level, count=count))
        return count

    def clear(self):
        removed = 0
        if self.directory.exists():
            for path in self.directory.glob('shell_d*_k*_l*.txt'):
                path.unlink()
                removed += 1
        logger.info(f"cleared {removed} cached shells from {self.directory}")
        return removed
