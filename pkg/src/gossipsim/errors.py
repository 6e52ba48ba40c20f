"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid parameter to a generator, sampler or protocol."""


class GenerationError(RuntimeError):
    """A random generator failed to produce a valid object within its retry budget."""


class FormatError(ValueError):
    """A data file does not conform to its expected format."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            loc = f"{loc}line {line}: "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


class ConfigError(ValueError):
    """Invalid experiment configuration (bad key, bad value, bad combination)."""


class SchemaError(ValueError):
    """A report table is missing columns or rows required by a figure preset."""
