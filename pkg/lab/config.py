"""Experiment configuration: CLI flags over an optional JSON manifest.

The resolved config is echoed into every output, so a run is determined by
it and the code version.
"""
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
import json
import logging
import re

from django.conf import settings

from lattice_shells.cache import ShellCache
from lattice_shells.shells import DiagonalForm
from spherelab.exceptions import ConfigError
from .serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)

# manifest keys that name the same setting
ALIASES = {'lambda': 'levels', 'lambda_list': 'levels', 'box_cap': 'max_cells'}
BUDGETS = ('max_cells', 'max_shell_points', 'quadrature_points', 'sample_budget', 'workers')


@dataclass
class ExperimentConfig:
    command: str
    d: int = 4
    k: int = 2
    levels: str = None
    p: str = None
    q: str = None
    method: str = None
    seed: int = 0
    output: str = None
    cache_dir: str = None
    max_cells: int = None
    max_shell_points: int = None
    quadrature_points: int = None
    sample_budget: int = None
    workers: int = None
    tolerances: dict = field(default_factory=dict)
    timings: bool = False
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        lab = settings.LAB
        for name in BUDGETS:
            if getattr(self, name) is None:
                setattr(self, name, lab[name.upper()])
        self.tolerances = {**lab['TOLERANCES'], **self.tolerances}
        self.cache_dir = str(self.cache_dir or lab['CACHE_DIR'])

    @property
    def form(self):
        return DiagonalForm(self.d, self.k)

    def cache(self):
        return ShellCache(self.cache_dir)

    def option(self, name, default=None):
        value = self.options.get(name)
        return default if value is None else value

    def resolved(self):
        """Everything that determines the numbers; no clock values."""
        return {key: value for key, value in sorted(asdict(self).items()) if key not in ('output', 'timings')}

    def echo(self):
        return json.dumps(self.resolved(), sort_keys=True, separators=(',', ':'), default=str)

    @contextmanager
    def applied(self):
        """Run with this config's budgets and tolerances in ``settings.LAB``."""
        previous = settings.LAB
        settings.LAB = {
            **previous,
            **{name.upper(): getattr(self, name) for name in BUDGETS},
            'CACHE_DIR': Path(self.cache_dir),
            'TOLERANCES': dict(self.tolerances),
        }
        try:
            yield self
        finally:
            settings.LAB = previous


def _line_of(text, key):
    """1-based line of the first ``"key":`` in the manifest text."""
    match = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count('\n', 0, match.start()) + 1 if match else None


def _first_error(errors):
    name, messages = next(iter(errors.items()))
    message = messages[0] if isinstance(messages, list) else messages
    if isinstance(message, dict):
        return _first_error(message)
    return name, str(message)


def load_manifest(path):
    """Parse a JSON manifest; errors carry the manifest line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read manifest {path}: {e}", path=str(path))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno, path=str(path))
    if not isinstance(data, dict):
        raise ConfigError("manifest must be a JSON object", line=1, path=str(path))
    if isinstance(data.get('form'), dict):
        form = data.pop('form')
        data.setdefault('d', form.get('d'))
        data.setdefault('k', form.get('k'))
    known = set(ExperimentConfigSerializer().fields)
    resolved = {}
    for key, value in data.items():
        name = ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown key {key!r}", line=_line_of(text, key), path=str(path))
        resolved[name] = value
    return resolved, text


def build_config(command, flags=None, manifest=None):
    """Validate manifest values overlaid by non-empty CLI flags."""
    data, text = ({}, None) if manifest is None else load_manifest(manifest)
    options = dict(data.pop('options', None) or {})
    for key, value in (flags or {}).items():
        if value is None or value is False:
            continue
        name = ALIASES.get(key, key)
        if name in ExperimentConfigSerializer().fields:
            data[name] = value
        else:
            options[name] = value
    data['command'] = command
    data['options'] = options

    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        name, message = _first_error(serializer.errors)
        line = _line_of(text, name) if text else None
        if line is None and text:
            aliases = [key for key, target in ALIASES.items() if target == name]
            line = next((_line_of(text, alias) for alias in aliases if _line_of(text, alias)), None)
        raise ConfigError(f"{name}: {message}", line=line, field=name)
    config = ExperimentConfig(**serializer.validated_data)
    logger.debug(f"resolved config for {command}: {config.echo()}")
    return config
