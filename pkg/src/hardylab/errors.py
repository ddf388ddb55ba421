"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical gate failed: degenerate region, unstable solve, unresolvable scale.

    The CLI maps this to exit code 3.
    """


class ConfigError(ValueError):
    """A config file or CLI argument is malformed. The CLI maps this to exit code 2."""
