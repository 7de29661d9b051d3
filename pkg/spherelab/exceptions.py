"""Error types raised by the lab apps.

Every error is a ``ValueError``; ``code`` and ``detail`` feed the JSON error payload printed by
``manage.py lab``.
"""


class LabError(ValueError):
    code = 'lab_error'

    def __init__(self, message, **detail):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def as_payload(self, command=None):
        return {
            'error': self.code,
            'command': command,
            'detail': {'message': self.message, **self.detail},
        }


class InvalidForm(LabError):
    code = 'invalid_form'


class BirchCriterionViolation(LabError):
    code = 'birch_criterion'


class ShellBudgetExceeded(LabError):
    """Raised by full enumeration; ``detail['count']`` is the count-only fallback."""
    code = 'shell_budget_exceeded'


class BoxTooLarge(LabError):
    code = 'box_too_large'


class InvalidExponent(LabError):
    code = 'invalid_exponent'


class RegimeViolation(LabError):
    code = 'regime_violation'


class QuadratureBudgetExceeded(LabError):
    code = 'quadrature_budget_exceeded'


class SampleBudgetExceeded(LabError):
    code = 'sample_budget_exceeded'


class DegenerateFit(LabError):
    code = 'degenerate_fit'


class NumericalDrift(LabError):
    code = 'numerical_drift'


class GridFormatError(LabError):
    code = 'grid_format'


class ConfigError(LabError):
    code = 'config_error'

    def __init__(self, message, line=None, **detail):
        if line is not None:
            detail['line'] = line
            message = f"line {line}: {message}"
        super().__init__(message, **detail)
        self.line = line
