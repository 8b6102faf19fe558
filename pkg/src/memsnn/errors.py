"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or structure."""


class ParseError(ValueError):
    """Malformed input file. Carries the offending location when known."""

    def __init__(self, message, path=None, line=None, key=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if key is not None:
            loc.append(f"key '{key}'")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.path = path
        self.line = line
        self.key = key


class AddressError(IndexError):
    """Wordline/bitline address outside the array."""


class MappingDomainError(ValueError):
    """Weight maps to a non-positive conductance."""


class ShapeError(ValueError):
    """Vector/matrix dimensions do not agree."""


class TargetError(ValueError):
    """Training target is not in the expected one-hot form."""


class TopologyError(ValueError):
    """Connectivity map is incomplete, duplicated, or out of bounds."""
