"""Exception hierarchy shared by the solver, audit and CLI layers."""


class BernoulliError(Exception):
    """Base class for every failure raised by the freeboundary package."""


class GeometryError(BernoulliError):
    """Invalid domain description or a mesh that cannot be built from it."""


class AssemblyError(BernoulliError):
    """Finite element assembly hit a degenerate element."""


class DirichletError(BernoulliError):
    """Dirichlet elimination was requested without constrained nodes."""


class SolverError(BernoulliError):
    """A linear or eigenvalue solve failed."""


class SolverDivergenceError(SolverError):
    """Conjugate gradients did not reach the tolerance within the iteration cap."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class EigenSolveError(SolverError):
    """Extreme eigenvalue iteration stagnated."""


class MeshMismatchError(BernoulliError):
    """Two fields that must share a mesh were computed on different meshes."""


class ShapeGradientError(BernoulliError):
    """A finite difference perturbation left the admissible set."""

    def __init__(self, message, coefficient):
        super().__init__(message)
        self.coefficient = coefficient


class AuditSlackError(BernoulliError):
    """An inequality of the corrected chain failed beyond tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(BernoulliError):
    """Run configuration failed validation; `errors` maps section -> field -> messages."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}
