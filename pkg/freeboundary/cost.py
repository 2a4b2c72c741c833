"""Energy-gap cost J = |u_N - u_R|^2_{H^1} and its central finite-difference shape gradient."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List

import numpy as np

from .exceptions import MeshMismatchError, ShapeGradientError
from .fem import DEFAULT_TOL, FemOperators
from .geometry import AdmissibilityLimits, DomainSpec, generate_mesh, validate_admissible
from .states import PhysicsParams, StateSolution, radial_oracle_neumann, radial_oracle_robin, \
    solve_neumann, solve_robin

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-3
RECONSTRUCTION_TOL = 1e-10


@dataclass(frozen=True)
class CostReport:
    J: float
    seminorm_neumann_sq: float
    seminorm_robin_sq: float
    cross_term: float
    reconstruction_residual: float
    n_r: int
    n_theta: int
    lam: float
    beta: float
    flux_sign: int

    def as_dict(self) -> dict:
        return {
            'J': self.J,
            'seminorm_neumann_sq': self.seminorm_neumann_sq,
            'seminorm_robin_sq': self.seminorm_robin_sq,
            'cross_term': self.cross_term,
            'reconstruction_residual': self.reconstruction_residual,
            'mesh': {'n_r': self.n_r, 'n_theta': self.n_theta},
            'params': {'lambda': self.lam, 'beta': self.beta, 'flux_sign': self.flux_sign},
        }


def energy_gap(mesh, uN: StateSolution, uR: StateSolution, operators: FemOperators = None) -> CostReport:
    """J = (u_N - u_R)^T K (u_N - u_R) with the assembled stiffness matrix."""
    if not (uN.mesh.same_as(mesh) and uR.mesh.same_as(mesh)):
        raise MeshMismatchError("energy_gap needs both state solutions on the given mesh")
    K = (operators or FemOperators(mesh)).stiffness
    diff = uN.u - uR.u
    J = max(float(diff @ (K @ diff)), 0.0)
    nn = float(uN.u @ (K @ uN.u))
    rr = float(uR.u @ (K @ uR.u))
    nr = float(uN.u @ (K @ uR.u))
    residual = abs(J - (nn + rr - 2.0 * nr)) / max(J, nn + rr, 1e-300)
    if residual > RECONSTRUCTION_TOL:
        logger.warning("Energy gap reconstruction residual %.3e exceeds %.0e", residual, RECONSTRUCTION_TOL)
    p = uN.params
    return CostReport(J, nn, rr, nr, residual, mesh.n_r, mesh.n_theta, p.lam, p.beta, p.flux_sign)


def evaluate_cost(spec: DomainSpec, p: PhysicsParams, n_r: int, n_theta: int,
                  tol: float = DEFAULT_TOL, max_iters: int = None) -> CostReport:
    mesh = generate_mesh(spec, n_r, n_theta)
    operators = FemOperators(mesh)
    uN = solve_neumann(mesh, p, operators, tol=tol, max_iters=max_iters)
    uR = solve_robin(mesh, p, operators, tol=tol, max_iters=max_iters)
    return energy_gap(mesh, uN, uR, operators)


def analytic_energy_gap(a: float, R: float, p: PhysicsParams) -> float:
    """Closed-form J on the concentric annulus: 2 pi ln(R/a) (c_N - c_R)^2."""
    cN = radial_oracle_neumann(a, R, p.flux).c
    cR = radial_oracle_robin(a, R, p.flux, p.beta).c
    return 2.0 * math.pi * math.log(R / a) * (cN - cR) ** 2


def parameter_labels(spec: DomainSpec) -> List[str]:
    labels = ['c0']
    for k in range(1, spec.harmonics + 1):
        labels += [f'cos{k}', f'sin{k}']
    return labels


def shape_gradient_fd(spec: DomainSpec, p: PhysicsParams, n_r: int, n_theta: int,
                      h_fd: float = DEFAULT_FD_STEP, limits: AdmissibilityLimits = None,
                      tol: float = DEFAULT_TOL, workers: int = 1) -> np.ndarray:
    """
    Central differences (J(x + h e_i) - J(x - h e_i)) / 2h over [c0, cos_1, sin_1, ...].
    Every perturbed domain is re-meshed with the same (n_r, n_theta).
    """
    limits = limits or AdmissibilityLimits()
    x = spec.parameter_vector()
    labels = parameter_labels(spec)
    perturbed = []
    for i in range(x.size):
        for sign in (1.0, -1.0):
            xp = x.copy()
            xp[i] += sign * h_fd
            candidate = spec.with_parameters(xp)
            violations = validate_admissible(candidate, limits)
            if violations:
                raise ShapeGradientError(
                    f"perturbing {labels[i]} by {sign * h_fd:+g} is inadmissible: {violations[0].message}",
                    coefficient=labels[i],
                )
            perturbed.append(candidate)

    def cost(candidate):
        return evaluate_cost(candidate, p, n_r, n_theta, tol=tol).J

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(cost, perturbed))
    else:
        values = [cost(candidate) for candidate in perturbed]
    values = np.array(values).reshape(x.size, 2)
    return (values[:, 0] - values[:, 1]) / (2.0 * h_fd)
