"""Minimization of the energy gap over the Fourier shape parameters of the free boundary."""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy import optimize

from .cost import DEFAULT_FD_STEP, evaluate_cost, parameter_labels, shape_gradient_fd
from .exceptions import ConfigError, GeometryError, ShapeGradientError
from .geometry import AdmissibilityLimits, DomainSpec, validate_admissible
from .states import PhysicsParams

logger = logging.getLogger(__name__)

GRADIENT_DESCENT = 'fd-gradient-descent'
NELDER_MEAD = 'nelder-mead'
METHODS = (GRADIENT_DESCENT, NELDER_MEAD)

# terminal statuses
CONVERGED_COST = 'converged_cost'
CONVERGED_GRADIENT = 'converged_gradient'
CONVERGED_SIMPLEX = 'converged_simplex'
MAX_ITERS = 'max_iters'
STALLED = 'stalled'

NELDER_MEAD_MAX_PARAMETERS = 5


@dataclass(frozen=True)
class OptimConfig:
    method: str = GRADIENT_DESCENT
    initial_step: float = 0.25
    shrink: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-8
    j_tol: float = 1e-10    # stop once J <= j_tol; also the Nelder-Mead fatol
    grad_tol: float = 1e-5  # stop once |grad J| <= grad_tol; also the Nelder-Mead xatol
    max_iters: int = 60
    n_r: int = 16
    n_theta: int = 64
    fd_step: float = DEFAULT_FD_STEP
    solver_tol: float = 1e-12
    workers: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        for name in ('initial_step', 'armijo', 'min_step', 'j_tol', 'grad_tol', 'fd_step', 'solver_tol'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if not 0 < self.shrink < 1:
            raise ValueError(f"shrink must lie in (0, 1), got {self.shrink}")
        if self.max_iters < 1 or self.workers < 1:
            raise ValueError("max_iters and workers must be at least 1")


@dataclass(frozen=True)
class OptimRecord:
    iteration: int
    parameters: Tuple[float, ...]
    J: float
    measure: float  # gradient norm (descent) or step between best vertices (simplex)
    step: float
    accepted: bool


@dataclass
class OptimTrajectory:
    initial: DomainSpec
    method: str
    records: List[OptimRecord] = field(default_factory=list)
    status: str = MAX_ITERS

    @property
    def final(self) -> OptimRecord:
        accepted = [record for record in self.records if record.accepted]
        return accepted[-1]

    def final_spec(self) -> DomainSpec:
        return self.initial.with_parameters(self.final.parameters)

    def accepted_specs(self) -> List[DomainSpec]:
        return [self.initial.with_parameters(r.parameters) for r in self.records if r.accepted]

    def csv_header(self) -> List[str]:
        return ['iteration', *parameter_labels(self.initial), 'J', 'measure', 'step', 'accepted']

    def to_rows(self):
        for r in self.records:
            yield [r.iteration, *r.parameters, r.J, r.measure, r.step, int(r.accepted)]

    def as_dict(self) -> dict:
        final = self.final
        return {
            'method': self.method,
            'status': self.status,
            'iterations': self.records[-1].iteration,
            'initial_J': self.records[0].J,
            'final_J': final.J,
            'final_parameters': dict(zip(parameter_labels(self.initial), final.parameters)),
        }


def _cost(spec: DomainSpec, p: PhysicsParams, cfg: OptimConfig) -> float:
    return evaluate_cost(spec, p, cfg.n_r, cfg.n_theta, tol=cfg.solver_tol).J


def _admissible(spec: DomainSpec, x: np.ndarray, limits: AdmissibilityLimits):
    try:
        candidate = spec.with_parameters(x)
    except GeometryError:
        return None
    return None if validate_admissible(candidate, limits) else candidate


def _descend(initial: DomainSpec, p: PhysicsParams, cfg: OptimConfig,
             limits: AdmissibilityLimits) -> OptimTrajectory:
    trajectory = OptimTrajectory(initial, cfg.method)
    spec = initial
    x = initial.parameter_vector()
    J = _cost(spec, p, cfg)

    for iteration in range(cfg.max_iters + 1):
        if J <= cfg.j_tol:
            trajectory.records.append(OptimRecord(iteration, tuple(x.tolist()), J, math.nan, 0.0, True))
            trajectory.status = CONVERGED_COST
            return trajectory
        try:
            grad = shape_gradient_fd(spec, p, cfg.n_r, cfg.n_theta, h_fd=cfg.fd_step, limits=limits,
                                     tol=cfg.solver_tol, workers=cfg.workers)
        except ShapeGradientError as exc:
            logger.warning("Gradient unavailable at iteration %d: %s", iteration, exc)
            trajectory.records.append(OptimRecord(iteration, tuple(x.tolist()), J, math.nan, 0.0, True))
            trajectory.status = STALLED
            return trajectory
        gnorm = float(np.linalg.norm(grad))
        trajectory.records.append(OptimRecord(iteration, tuple(x.tolist()), J, gnorm, 0.0, True))
        logger.info("iteration %d: J=%.6e |grad|=%.3e", iteration, J, gnorm)
        if gnorm <= cfg.grad_tol:
            trajectory.status = CONVERGED_GRADIENT
            return trajectory
        if iteration == cfg.max_iters:
            break

        step = cfg.initial_step
        while step >= cfg.min_step:
            trial = x - step * grad
            candidate = _admissible(initial, trial, limits)
            if candidate is not None:
                J_trial = _cost(candidate, p, cfg)
                if J_trial <= J - cfg.armijo * step * gnorm ** 2:
                    x, spec, J = trial, candidate, J_trial
                    break
                trajectory.records.append(OptimRecord(iteration, tuple(trial.tolist()), J_trial, gnorm,
                                                      step, False))
            step *= cfg.shrink
        else:
            logger.warning("No admissible descent step above %.1e at iteration %d", cfg.min_step, iteration)
            trajectory.status = STALLED
            return trajectory

    trajectory.status = MAX_ITERS
    return trajectory


def _nelder_mead(initial: DomainSpec, p: PhysicsParams, cfg: OptimConfig,
                 limits: AdmissibilityLimits) -> OptimTrajectory:
    trajectory = OptimTrajectory(initial, cfg.method)
    x0 = initial.parameter_vector()

    def objective(x):
        candidate = _admissible(initial, x, limits)
        # inadmissible vertices are rejected by the simplex moves
        return math.inf if candidate is None else _cost(candidate, p, cfg)

    J0 = objective(x0)
    trajectory.records.append(OptimRecord(0, tuple(x0.tolist()), J0, 0.0, 0.0, True))
    if J0 <= cfg.j_tol:
        trajectory.status = CONVERGED_COST
        return trajectory

    def callback(intermediate_result):
        previous = np.array(trajectory.records[-1].parameters)
        x = np.asarray(intermediate_result.x, dtype=float)
        J = float(intermediate_result.fun)
        trajectory.records.append(OptimRecord(len(trajectory.records), tuple(x.tolist()), J,
                                              float(np.linalg.norm(x - previous)), 0.0, True))
        if J <= cfg.j_tol:
            raise StopIteration

    simplex = np.vstack([x0, x0 + cfg.initial_step * np.eye(x0.size)])
    result = optimize.minimize(objective, x0, method='Nelder-Mead', callback=callback,
                               options={'maxiter': cfg.max_iters, 'initial_simplex': simplex,
                                        'xatol': cfg.grad_tol, 'fatol': cfg.j_tol})
    if trajectory.records[-1].J <= cfg.j_tol:
        trajectory.status = CONVERGED_COST
    elif result.success:
        trajectory.status = CONVERGED_SIMPLEX
    elif result.nit >= cfg.max_iters:
        trajectory.status = MAX_ITERS
    else:
        trajectory.status = STALLED
    logger.info("Nelder-Mead finished after %d iterations: %s", result.nit, result.message)
    return trajectory


def optimize_shape(initial: DomainSpec, p: PhysicsParams, cfg: OptimConfig = None,
                   limits: AdmissibilityLimits = None) -> OptimTrajectory:
    """
    Minimize J over [c0, cos_1, sin_1, ...] on a fixed mesh resolution. Every recorded accepted
    iterate is admissible; a line search that cannot find an admissible decrease ends with
    status "stalled".
    """
    cfg = cfg or OptimConfig()
    limits = limits or AdmissibilityLimits()
    violations = validate_admissible(initial, limits)
    if violations:
        raise GeometryError(f"initial domain is inadmissible: {violations[0].message}")
    if cfg.method == NELDER_MEAD and initial.parameter_vector().size > NELDER_MEAD_MAX_PARAMETERS:
        message = (f"nelder-mead handles at most {NELDER_MEAD_MAX_PARAMETERS} shape parameters, "
                   f"got {initial.parameter_vector().size}")
        raise ConfigError(message, errors={'optimizer': {'method': [message]}})
    if p.flux_sign != -1:
        logger.warning("Optimizing with flux_sign=%+d; the Bernoulli target is posed with -1", p.flux_sign)

    if cfg.method == NELDER_MEAD:
        trajectory = _nelder_mead(initial, p, cfg, limits)
    else:
        trajectory = _descend(initial, p, cfg, limits)
    logger.info("Shape optimization (%s) ended with status %s, J=%.6e",
                cfg.method, trajectory.status, trajectory.final.J)
    return trajectory
