"""
mfspec: exception hierarchy

Parameter and range errors subclass ValueError so callers that only know
about ValueError still catch them.
"""

from typing import Optional


class MfspecError(Exception):
    """Base class for every error raised by the analysis pipeline"""


class InvalidInputError(MfspecError, ValueError):
    """Data is empty, mis-shaped or otherwise unusable"""


class InvalidParameterError(MfspecError, ValueError):
    """A scalar parameter is outside its admissible range"""

    def __init__(self, param: str, message: str):
        super().__init__(f"{param}: {message}")
        self.param = param


class InvalidRangeError(MfspecError, ValueError):
    """Regression range does not hold enough usable scales"""


class InsufficientLengthError(MfspecError, ValueError):
    """Signal or image too short for the requested decomposition depth"""


class UnsupportedFilterError(MfspecError, ValueError):
    """No Daubechies filter for the requested number of vanishing moments"""


class EmbeddingError(MfspecError, RuntimeError):
    """Circulant embedding stayed non positive-definite after resizing"""


class ConfigError(MfspecError, ValueError):
    """Experiment or preset file could not be parsed or validated"""

    def __init__(self, field: str, message: str, line: Optional[int] = None):
        where = f"{field}" if line is None else f"{field} (line {line})"
        super().__init__(f"{where}: {message}")
        self.field = field
        self.line = line
