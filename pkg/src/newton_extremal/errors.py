"""Exception hierarchy shared by all modules."""


class ExtremalError(Exception):
    """Base class for every error raised by this package."""


class SingularPoint(ExtremalError):
    """Evaluation requested on (or within the exclusion radius of) a kernel singularity."""


class Divergent(ExtremalError):
    """A quadrature failed to converge within its node budget."""


class SlowConvergence(ExtremalError):
    """A series did not reach the requested tolerance within ``max_terms``."""


class OddDimension(ExtremalError):
    """The even-dimension term decomposition was requested for odd ``n``."""


class FeasibilityTimeout(ExtremalError):
    """The sampler could not produce a feasible measure."""


class SolverError(ExtremalError):
    """Base class for failures of the cap Dirichlet solver."""


class IllConditioned(SolverError):
    pass


class ResidualTooLarge(SolverError):
    pass


class DegenerateRatio(SolverError):
    pass


class NegativeSigma(SolverError):
    pass


class NegativeDensity(SolverError):
    pass


class BisectionFailure(SolverError):
    pass


class PoleInput(ExtremalError):
    """The Kelvin map was applied at its pole."""


class NoiseFloor(ExtremalError):
    """Solver noise dominates a finite-difference extrapolation."""


class BranchAmbiguity(ExtremalError):
    """A square-root branch was requested exactly at a branch point."""


class QuadratureFailure(ExtremalError):
    pass


class OutOfRange(ExtremalError):
    """The mass-moving reparametrisation left its admissible range."""


class AscentStagnation(ExtremalError):
    pass


class ConfigError(ExtremalError):
    pass
