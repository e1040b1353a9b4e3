"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
1 for configuration problems, 2 for numerical failures, 3 for invalid models.
"""


class GeoPhaseError(Exception):
    exit_code = 2


class ConfigError(GeoPhaseError, ValueError):
    exit_code = 1


class ModelError(GeoPhaseError, ValueError):
    exit_code = 3


class NonHermitianError(ModelError):
    pass


class DomainError(ModelError):
    """Evaluation time outside the domain of a sampled Hamiltonian."""


class NumericalError(GeoPhaseError, ArithmeticError):
    exit_code = 2


class DegenerateSpectrum(NumericalError):
    pass


class ContinuationBreakdown(NumericalError):
    """Consecutive eigenframes too far apart to be matched."""


class IntegrationAccuracyError(NumericalError):
    pass


class StiffnessError(NumericalError):
    pass


class OrthogonalEndpointsError(NumericalError):
    """The endpoint overlap is too small for its argument to be defined."""


class AdiabaticityLost(NumericalError):
    pass
