"""Exception hierarchy for thermomodal."""


class ThermoModalError(Exception):
    """Base class for all errors raised by the package."""


class GramNotSPD(ThermoModalError):
    """A Gram block failed the positive-definiteness check during Cholesky."""


class UndefinedEntry(ThermoModalError):
    """A closed-form matrix formula divides by zero at an index pair it claims to cover."""

    def __init__(self, block, i, j, message=None):
        self.block = block
        self.i = i
        self.j = j
        super().__init__(message or f"block {block}: formula undefined at (i, j) = ({i}, {j})")


class SingularShift(ThermoModalError):
    """The shift lies (numerically) in the spectrum, so the resolvent does not exist."""

    def __init__(self, shift, sigma_min):
        self.shift = shift
        self.sigma_min = sigma_min
        super().__init__(f"shift {shift!r} is numerically in the spectrum (sigma_min={sigma_min:.3e})")


class SingularMatrix(ThermoModalError):
    """Matrix is not invertible."""


class NoConvergence(ThermoModalError):
    """An iterative method did not converge."""


class InsufficientBranch(ThermoModalError):
    """Too few eigenvalues qualify for a branch fit."""


class IncompatibleData(ThermoModalError):
    """Initial data violates a boundary condition of the selected basis."""


class IllConditionedEigenbasis(ThermoModalError):
    """Eigenvector matrix too ill-conditioned for an eigen-expansion."""


class NonPositiveEnergy(ThermoModalError):
    """An energy sample inside a fit window is not strictly positive."""


class ScenarioError(ThermoModalError):
    """Base for scenario file problems."""


class ParseError(ScenarioError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ValidationError(ScenarioError):
    """Scenario has one or more invalid fields; ``violations`` lists all of them."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.violations))
