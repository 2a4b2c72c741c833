"""
Auxiliary state problems on a mesh (mixed Dirichlet-Neumann and Dirichlet-Robin Laplace
problems with u = 1 on Gamma) and their closed-form radial counterparts on concentric annuli.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from .exceptions import GeometryError
from .fem import DEFAULT_TOL, FemOperators, apply_dirichlet, assemble_boundary_load, pcg
from .geometry import Mesh

logger = logging.getLogger(__name__)

LIFTING_VALUE = 1.0
LIFTING_TERM_TOL = 1e-10
BISECTION_XTOL = 1e-12


class StateKind(str, Enum):
    NEUMANN = 'neumann'
    ROBIN = 'robin'


@dataclass(frozen=True)
class PhysicsParams:
    lam: float
    beta: float
    flux_sign: int = -1

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.flux_sign not in (1, -1):
            raise ValueError(f"flux_sign must be +1 or -1, got {self.flux_sign}")

    @property
    def flux(self) -> float:
        """Boundary datum g = flux_sign * lambda imposed on Sigma."""
        return self.flux_sign * self.lam


@dataclass(frozen=True, eq=False)
class StateSolution:
    kind: StateKind
    mesh: Mesh
    u: np.ndarray
    w: np.ndarray
    params: PhysicsParams
    residual: float
    iterations: int
    lifting_term: float  # max |A u0| over free nodes; zero because u0 is constant
    gamma_flux: float    # consistent discrete flux through Gamma

    def to_rows(self):
        for index, ((x, y), value) in enumerate(zip(self.mesh.nodes.tolist(), self.u.tolist())):
            yield index, x, y, value


def _solve_state(kind: StateKind, mesh: Mesh, p: PhysicsParams, operators: FemOperators,
                 tol: float, max_iters: int = None) -> StateSolution:
    load = assemble_boundary_load(mesh, p.flux)
    if kind is StateKind.NEUMANN:
        matrix = operators.stiffness
    else:
        matrix = (operators.stiffness + p.beta * operators.boundary_mass).tocsr()

    system = apply_dirichlet(matrix, load, mesh.gamma_nodes, LIFTING_VALUE)
    # the volume term -a(u0, phi) vanishes for the constant lifting; verify instead of dropping it
    stiffness_term = (operators.stiffness @ system.lifting)[system.free]
    lifting_term = float(np.max(np.abs(stiffness_term))) if stiffness_term.size else 0.0
    scale = max(1.0, float(np.abs(operators.stiffness.diagonal()).max()))
    if lifting_term > LIFTING_TERM_TOL * scale:
        logger.warning("Lifting gradient term is %.3e, expected zero for u0 = 1", lifting_term)

    result = pcg(system.matrix, system.rhs, tol=tol, max_iters=max_iters)
    w = system.expand(result.x)
    u = system.reassemble(result.x)
    gamma_flux = float((matrix @ u - load)[system.constrained].sum())
    logger.debug("%s solve: %d iterations, residual %.2e", kind.value, result.iterations,
                 result.relative_residual)
    return StateSolution(kind, mesh, u, w, p, result.relative_residual, result.iterations,
                         lifting_term, gamma_flux)


def solve_neumann(mesh: Mesh, p: PhysicsParams, operators: FemOperators = None,
                  tol: float = DEFAULT_TOL, max_iters: int = None) -> StateSolution:
    """u_N: Laplace in Omega, u = 1 on Gamma, du/dn = g on Sigma."""
    return _solve_state(StateKind.NEUMANN, mesh, p, operators or FemOperators(mesh), tol, max_iters)


def solve_robin(mesh: Mesh, p: PhysicsParams, operators: FemOperators = None,
                tol: float = DEFAULT_TOL, max_iters: int = None) -> StateSolution:
    """
    u_R: Laplace in Omega, u = 1 on Gamma, du/dn + beta u = g on Sigma. The lifting contributes
    -beta * M_Sigma 1 to the right side, i.e. the consistent boundary datum is g - beta.
    """
    return _solve_state(StateKind.ROBIN, mesh, p, operators or FemOperators(mesh), tol, max_iters)


@dataclass(frozen=True)
class RadialSolution:
    """u(r) = 1 + c ln(r / a) on the concentric annulus a < r < R."""
    c: float
    a: float
    R: float

    def value(self, r):
        return 1.0 + self.c * np.log(np.asarray(r, dtype=float) / self.a)

    def derivative(self, r):
        return self.c / np.asarray(r, dtype=float)

    def at_points(self, points: np.ndarray) -> np.ndarray:
        return self.value(np.hypot(points[..., 0], points[..., 1]))

    def gradient(self, points: np.ndarray) -> np.ndarray:
        r2 = points[..., 0] ** 2 + points[..., 1] ** 2
        return self.c * points / r2[..., None]

    def dirichlet_energy(self) -> float:
        return 2.0 * math.pi * self.c ** 2 * math.log(self.R / self.a)


def _check_radii(a: float, R: float):
    if not (0 < a < R):
        raise GeometryError(f"radial oracle needs 0 < a < R, got a={a}, R={R}")


def radial_oracle_neumann(a: float, R: float, g: float) -> RadialSolution:
    _check_radii(a, R)
    return RadialSolution(g * R, a, R)


def radial_oracle_robin(a: float, R: float, g: float, beta: float) -> RadialSolution:
    _check_radii(a, R)
    return RadialSolution((g - beta) / (1.0 / R + beta * math.log(R / a)), a, R)


def bernoulli_flux(a: float, R: float) -> float:
    """-du/dn on r = R of the radial solution with u = 1 at r = a and u = 0 at r = R."""
    _check_radii(a, R)
    return 1.0 / (R * math.log(R / a))


def bernoulli_radius(a: float, lam: float) -> float:
    """Unique R* > a with R* ln(R*/a) = 1/lambda, by bisection."""
    if not (a > 0 and lam > 0):
        raise ValueError(f"bernoulli_radius needs a > 0 and lambda > 0, got a={a}, lambda={lam}")

    def excess(R):
        return R * math.log(R / a) - 1.0 / lam

    hi = 2.0 * a
    while excess(hi) <= 0:
        hi *= 2.0
    return optimize.bisect(excess, a, hi, xtol=BISECTION_XTOL * max(1.0, a), maxiter=500)
