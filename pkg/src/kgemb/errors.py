"""Exception types shared across the package.

The CLI maps these onto exit codes: anything derived from ValidationError
exits with code 1, everything else with code 2.
"""


class ValidationError(ValueError):
    """Bad user input: flags, config values, file schemas."""


class ParseError(ValidationError):
    """A data file that does not match its expected line format."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class VocabError(ValidationError):
    """A label that is missing from (or duplicated in) a vocabulary."""


class FormatError(ValidationError):
    """A binary artifact whose header or payload is malformed."""


class ConfigError(ValidationError):
    """A run configuration with out-of-range or missing fields."""


class TrainingError(RuntimeError):
    """Training aborted at runtime, e.g. on a non-finite loss."""
