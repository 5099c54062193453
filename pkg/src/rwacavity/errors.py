"""Exception and warning types raised across the package."""


class ValidationError(ValueError):
    """Invalid model, state or configuration input.

    ``key`` names the offending field when one can be identified; the CLI
    echoes it in its error document.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class NumericalError(ArithmeticError):
    """A computation left its domain of validity (underflow, branch loss, ...)."""


class EtaVanishesError(NumericalError):
    """|eta(t)| dropped below threshold where eta appears in a denominator."""

    def __init__(self, t: float, magnitude: float):
        super().__init__(f"eta-vanishes: |eta({t:g})| = {magnitude:.3e}")
        self.t = t
        self.magnitude = magnitude


class LeakageWarning(UserWarning):
    """Probability weight lost to Fock-space truncation exceeds its budget."""
