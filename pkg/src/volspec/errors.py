"""Exception hierarchy.

Two top-level families matter operationally: configuration problems
(bad inputs, bad config files) and numerical guard trips (leakage,
imaginary residue, degenerate rates).  The CLI maps the former to exit
code 2 and the latter to exit code 3.
"""


class VolspecError(Exception):
    """Base class for all package errors."""


class ConfigError(VolspecError):
    """Invalid configuration: bad file, bad dimensions, bad parameters."""


class DomainError(ConfigError):
    """An argument is outside the domain an operation is defined on."""


class InversionError(DomainError):
    """A quoted price violates no-arbitrage bounds for its payoff."""


class NumericalError(VolspecError):
    """A numerical guard tripped; results would not be trustworthy."""


class DiagonalizationError(NumericalError):
    """Eigenvector matrix too ill-conditioned to invert reliably."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class KernelError(NumericalError):
    """A transition kernel failed a validity check (mass, sign, residue)."""


class DegenerateRateError(NumericalError):
    """A generator row acquired a meaningfully negative rate."""


class LeakageError(NumericalError):
    """Probability mass wrapped around the periodic variance lattice."""
