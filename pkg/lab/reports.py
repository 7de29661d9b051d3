"""Result tables: CSV with a ``# config:`` and a ``# generated_at:`` header line.

Rows are flushed as they are written, so a failed run leaves its completed
rows behind. Apart from ``generated_at`` the file depends only on the config.
"""
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
import csv
import io
import json
import logging
import sys

from lattice_shells.shells import DiagonalForm
from norm_lab.exponents import as_fraction, birch_parameters, critical_p, eta, improving_exponent, trivial_bound_exponent
from norm_lab.fits import fit_log_log
from spherelab.exceptions import DegenerateFit, LabError

logger = logging.getLogger(__name__)

NORM_COLUMNS = ('lambda', 'estimate', 'method', 'iters', 'seconds')
REPORT_COLUMNS = (
    'source', 'command', 'd', 'k', 'p', 'q', 'method', 'points', 'fitted_slope', 'residual',
    'predicted_improving', 'predicted_trivial', 'predicted_eta', 'predicted_error_decay',
)
# value column fitted against lambda, by table layout
VALUE_COLUMNS = ('estimate', 'sup_estimate')


def format_value(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ' '.join(format_value(v) for v in value)
    return str(value)


class ResultWriter:
    """Streams one table to a file (or a text stream)."""

    def __init__(self, target, columns, config=None):
        self.columns = list(columns)
        self.config = config
        self.rows = 0
        self._owned = False
        if target is None or hasattr(target, 'write'):
            self.stream = target if target is not None else sys.stdout
            self.path = None
        else:
            self.path = Path(target)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.stream = open(self.path, 'w', newline='')
            self._owned = True
        self._csv = csv.writer(self.stream, lineterminator='\n')

    def __enter__(self):
        if self.config is not None:
            self.comment('config', self.config.echo())
        self.comment('generated_at', datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ'))
        self._csv.writerow(self.columns)
        return self

    def __exit__(self, exc_type, exc, tb):
        self.stream.flush()
        if self._owned:
            self.stream.close()
        if exc is not None:
            logger.error(f"table {self.path or 'stdout'} left with {self.rows} rows after failure: {exc}")
        return False

    def comment(self, key, value):
        self.stream.write(f"# {key}: {value}\n")
        self.stream.flush()

    def write(self, row):
        if isinstance(row, dict):
            row = [row.get(column) for column in self.columns]
        self._csv.writerow([format_value(value) for value in row])
        self.stream.flush()
        self.rows += 1

    def write_all(self, rows):
        for row in rows:
            self.write(row)


def read_table(path):
    """``(meta, rows)``: ``meta`` maps comment keys to values (``config`` parsed as JSON)."""
    meta, lines = {}, []
    with open(path, newline='') as fh:
        for line in fh:
            if line.startswith('# '):
                key, _, value = line[2:].rstrip('\n').partition(': ')
                meta[key] = json.loads(value) if key in ('config', 'fit') else value
            else:
                lines.append(line)
    rows = list(csv.DictReader(io.StringIO(''.join(lines))))
    return meta, rows


def _exact(value):
    return None if value is None else str(value)


def predictions(config):
    """Closed-form exponents as λ-powers (negative means decay)."""
    d, k, command = config.get('d', 4), config.get('k', 2), config.get('command')
    out = {}
    if command == 'mult' and k == 2:
        out['predicted_error_decay'] = str(Fraction(3 - d, 4))
    p = config.get('p')
    if p is None or command != 'norm':
        return out
    form = DiagonalForm(d, k)
    p = as_fraction(p)
    try:
        out['predicted_trivial'] = _exact(-trivial_bound_exponent(form, p))
        out['predicted_eta'] = _exact(-eta(birch_parameters(form, strict=False), p))
        if k == 2 and p >= critical_p(d):
            out['predicted_improving'] = _exact(-improving_exponent(d, p))
    except LabError as e:
        logger.warning(f"no prediction for d={d} k={k} p={p}: {e}")
    return out


def summarize(path):
    meta, rows = read_table(path)
    config = meta.get('config', {})
    column = next((c for c in VALUE_COLUMNS if rows and c in rows[0]), None)
    summary = {
        'source': str(path), 'command': config.get('command'), 'd': config.get('d'), 'k': config.get('k'),
        'p': config.get('p'), 'q': config.get('q'), 'method': config.get('method'), 'points': len(rows),
    }
    summary.update(predictions(config))
    if column is None:
        return summary
    pairs = sorted({int(row['lambda']): float(row[column]) for row in rows if row.get(column)}.items())
    try:
        fit = fit_log_log([level for level, _ in pairs], [value for _, value in pairs])
        summary.update(fitted_slope=fit.slope, residual=fit.residual)
    except DegenerateFit as e:
        logger.warning(f"no fit for {path}: {e}")
    return summary


def build_report(paths, target, config=None):
    with ResultWriter(target, REPORT_COLUMNS, config) as writer:
        for path in paths:
            writer.write(summarize(path))
    logger.info(f"report over {len(paths)} tables written to {target or 'stdout'}")
    return writer.rows
