"""
Numerical audit of the boundedness estimate for the Robin state.

Three pieces: the literal substitution phi = u_R with the boxed Cauchy-Schwarz bound (and a
scaling probe showing that bound cannot hold), the Poincare-Friedrichs and trace constants
of a mesh, and the corrected inequality chain evaluated on the lifted field w_R = u_R - 1.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import LinearOperator, lobpcg

from .exceptions import AuditSlackError, EigenSolveError, GeometryError
from .fem import DEFAULT_TOL, FemOperators
from .geometry import AdmissibilityLimits, DomainSpec, Mesh, generate_mesh, validate_admissible
from .states import PhysicsParams, StateSolution, solve_robin

logger = logging.getLogger(__name__)

SLACK_TOL = 1e-10
CERTIFICATION_TOL = 1e-9
CERTIFICATION_SAMPLES = 1000
DENSE_EIGEN_LIMIT = 3000
EIGEN_RESIDUAL_TOL = 1e-6
DEFAULT_SCALES = np.geomspace(1.0, 100.0, 81)


# --- extreme generalized eigenvalues ---

def _largest_dense(A, B):
    n = A.shape[0]
    try:
        values, vectors = linalg.eigh(A, B, subset_by_index=[n - 1, n - 1])
    except linalg.LinAlgError as exc:
        raise EigenSolveError(f"dense generalized eigensolve failed: {exc}") from exc
    return float(values[0]), vectors[:, 0]


def _largest_iterative(A, B, diagonal, seed, maxiter=1000):
    n = A.shape[0]
    block = min(4, n)
    X = np.random.default_rng(seed).standard_normal((n, block))
    preconditioner = sparse.diags(1.0 / diagonal).tocsr()
    values, vectors = lobpcg(A, X, B=B, M=preconditioner, largest=True, tol=1e-10, maxiter=maxiter)
    top = int(np.argmax(values))
    value, vector = float(values[top]), vectors[:, top]
    residual = np.linalg.norm(A @ vector - value * (B @ vector))
    scale = abs(value) * np.linalg.norm(B @ vector)
    if not np.isfinite(residual) or residual > EIGEN_RESIDUAL_TOL * max(scale, 1e-300):
        raise EigenSolveError(f"eigen iteration stagnated (residual {residual:.3e})")
    return value, vector


def _rank_one_operator(K, b):
    n = K.shape[0]
    # scipy hands matvec an (n, 1) column once the active block shrinks to one vector
    return LinearOperator((n, n), matvec=lambda x: K @ np.ravel(x) + b * (b @ np.ravel(x)),
                          matmat=lambda X: K @ X + np.outer(b, b @ X), dtype=float)


# --- certification fields ---

def certification_fields(mesh: Mesh, samples: int, seed: int) -> np.ndarray:
    """Deterministic test fields: nodal noise, cubic polynomials, constants plus small noise."""
    rng = np.random.default_rng(seed)
    n = mesh.node_count
    scale = np.abs(mesh.nodes).max()
    x, y = mesh.nodes[:, 0] / scale, mesh.nodes[:, 1] / scale
    monomials = np.column_stack([x ** i * y ** j for i in range(4) for j in range(4 - i)])
    third = samples // 3
    noise = rng.standard_normal((n, third))
    smooth = monomials @ rng.standard_normal((monomials.shape[1], third))
    rest = samples - 2 * third
    offsets = rng.standard_normal(rest)[None, :] + 0.1 * rng.standard_normal((n, rest))
    offsets[:, 0] = 1.0
    return np.hstack((noise, smooth, offsets))


def _relative_slack(lhs: float, rhs: float) -> float:
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale < 1e-300 else (rhs - lhs) / scale


@dataclass(frozen=True)
class Certification:
    samples: int
    max_ratio: float
    min_slack: float
    certified: bool


def _certify(numerator, denominator, constant) -> Certification:
    keep = denominator > 0
    ratios = numerator[keep] / denominator[keep]
    slacks = (constant * denominator[keep] - numerator[keep]) / (constant * denominator[keep])
    min_slack = float(slacks.min()) if slacks.size else 0.0
    return Certification(int(keep.sum()), float(ratios.max()) if ratios.size else 0.0,
                         min_slack, min_slack >= -CERTIFICATION_TOL)


# --- constants ---

@dataclass(frozen=True)
class PfEstimate:
    C_pf: float
    mu_max: float
    n_r: int
    n_theta: int
    lower_bound: float
    certification: Certification

    def as_dict(self) -> dict:
        return asdict(self)


def pf_ratio(operators: FemOperators, v) -> float:
    """||v||_{H^1} / (|int_Sigma v| + |v|_{H^1}) for one field."""
    return float(operators.h1_norm(v) / (abs(operators.trace_integral(v)) + operators.h1_seminorm(v)))


def estimate_pf_constant(mesh: Mesh, operators: FemOperators = None,
                         samples: int = CERTIFICATION_SAMPLES, seed: int = 42,
                         dense_limit: int = DENSE_EIGEN_LIMIT) -> PfEstimate:
    """
    C_pf = sqrt(mu_max) for (K + M) x = mu (b b^T + K) x. Valid for the sum form of the
    inequality because (|int v| + |v|)^2 >= (int v)^2 + |v|^2.
    """
    ops = operators or FemOperators(mesh)
    if ops.sigma_length <= 0:
        raise GeometryError("Poincare-Friedrichs constant needs m(Sigma) > 0")
    K, M, b = ops.stiffness, ops.mass, ops.sigma_weights
    A = (K + M).tocsr()
    if mesh.node_count <= dense_limit:
        mu, _ = _largest_dense(A.toarray(), K.toarray() + np.outer(b, b))
    else:
        mu, _ = _largest_iterative(A, _rank_one_operator(K, b), K.diagonal() + b * b, seed)
    C_pf = math.sqrt(mu)

    fields = certification_fields(mesh, samples, seed)
    numerator = ops.h1_norm(fields)
    denominator = np.abs(ops.trace_integral(fields)) + ops.h1_seminorm(fields)
    certification = _certify(numerator, denominator, C_pf)
    if not certification.certified:
        logger.warning("C_pf=%.6g failed certification (min slack %.3e)", C_pf, certification.min_slack)
    lower = math.sqrt(ops.domain_area) / ops.sigma_length
    logger.info("C_pf=%.6g (mu_max=%.6g, lower bound %.6g) on %dx%d mesh",
                C_pf, mu, lower, mesh.n_r, mesh.n_theta)
    return PfEstimate(C_pf, mu, mesh.n_r, mesh.n_theta, lower, certification)


def estimate_trace_constant(mesh: Mesh, operators: FemOperators = None, seed: int = 42,
                            dense_limit: int = DENSE_EIGEN_LIMIT) -> float:
    """C_tr = sqrt(nu_max) for M_Sigma x = nu (K + M) x."""
    ops = operators or FemOperators(mesh)
    A = (ops.stiffness + ops.mass).tocsr()
    if mesh.node_count <= dense_limit:
        nu, _ = _largest_dense(ops.boundary_mass.toarray(), A.toarray())
    else:
        nu, _ = _largest_iterative(ops.boundary_mass, A, A.diagonal(), seed)
    return math.sqrt(nu)


def certify_trace_constant(mesh: Mesh, C_tr: float, operators: FemOperators = None,
                           samples: int = CERTIFICATION_SAMPLES, seed: int = 42) -> Certification:
    ops = operators or FemOperators(mesh)
    fields = certification_fields(mesh, samples, seed)
    return _certify(ops.boundary_l2(fields), ops.h1_norm(fields), C_tr)


# --- literal substitution and the flawed bound ---

@dataclass(frozen=True)
class LiteralTerms:
    flux_sign: int
    dirichlet_energy: float       # left side: int |grad u_R|^2
    lifting_term: float           # -int grad u0 . grad u_R
    robin_term: float             # -beta ||u_R||^2_{L2(Sigma)}
    flux_term: float              # int_Sigma g u_R
    right_side: float
    residual: float               # left - right
    gamma_flux: float             # consistent discrete flux through Gamma
    sigma_trace_norm: float
    robin_bound_term: float       # beta ||u_R||^2_{L2(Sigma)}
    flux_bound_integral: float    # lambda int_Sigma |u_R|, nodal absolute values
    flux_bound_sigma: float       # lambda m(Sigma)^{1/2} ||u_R||_{L2(Sigma)}
    flux_bound_holdall: float     # lambda |U|^{1/2} ||u_R||_{L2(Sigma)}
    true_bound_sum: float
    boxed: float                  # max{beta, lambda |U|^{1/2}} ||u_R||_{L2(Sigma)}
    estimate_left: float
    estimate_right: float
    estimate_holds: bool


@dataclass(frozen=True)
class LiteralAudit:
    positive_sign: LiteralTerms   # flux_sign = +1
    default_sign: LiteralTerms    # flux_sign = -1


def _literal_terms(mesh: Mesh, p: PhysicsParams, holdall_area: float, ops: FemOperators,
                   robin: StateSolution) -> LiteralTerms:
    u = robin.u
    K, Ms, b = ops.stiffness, ops.boundary_mass, ops.sigma_weights
    energy = float(u @ (K @ u))
    lifting = -float(np.ones(mesh.node_count) @ (K @ u))
    trace_sq = max(float(u @ (Ms @ u)), 0.0)
    robin_term = -p.beta * trace_sq
    flux_term = p.flux * float(b @ u)
    right = lifting + robin_term + flux_term
    trace = math.sqrt(trace_sq)
    root_U = math.sqrt(holdall_area)
    robin_bound_term = p.beta * trace_sq
    flux_bound_holdall = p.lam * root_U * trace
    boxed = max(p.beta, p.lam * root_U) * trace
    estimate_left = energy
    estimate_right = root_U * math.sqrt(max(energy, 0.0)) + boxed
    return LiteralTerms(
        flux_sign=p.flux_sign,
        dirichlet_energy=energy,
        lifting_term=lifting,
        robin_term=robin_term,
        flux_term=flux_term,
        right_side=right,
        residual=energy - right,
        gamma_flux=robin.gamma_flux,
        sigma_trace_norm=trace,
        robin_bound_term=robin_bound_term,
        flux_bound_integral=p.lam * float(b @ np.abs(u)),
        flux_bound_sigma=p.lam * math.sqrt(ops.sigma_length) * trace,
        flux_bound_holdall=flux_bound_holdall,
        true_bound_sum=robin_bound_term + flux_bound_holdall,
        boxed=boxed,
        estimate_left=estimate_left,
        estimate_right=estimate_right,
        estimate_holds=estimate_left <= estimate_right,
    )


def audit_literal_substitution(mesh: Mesh, p: PhysicsParams, holdall_area: float,
                               operators: FemOperators = None, tol: float = DEFAULT_TOL) -> LiteralAudit:
    """
    Evaluate the substitution phi = u_R for both sign conventions. phi = u_R is not zero on
    Gamma, so the identity misses the Gamma flux; the residual reproduces it.
    """
    ops = operators or FemOperators(mesh)
    terms = {}
    for sign in (1, -1):
        signed = PhysicsParams(p.lam, p.beta, sign)
        robin = solve_robin(mesh, signed, ops, tol=tol)
        terms[sign] = _literal_terms(mesh, signed, holdall_area, ops, robin)
    return LiteralAudit(positive_sign=terms[1], default_sign=terms[-1])


@dataclass(frozen=True)
class FlawWitness:
    found: bool
    degenerate: bool
    scale: Optional[float]
    true_sum: Optional[float]
    boxed: Optional[float]
    trace_norm: float
    threshold: Optional[float]  # smallest s with beta s n > max{beta, L} - L


def flawed_bound_probe(mesh: Mesh, p: PhysicsParams, holdall_area: float, s_grid: Sequence[float] = None,
                       operators: FemOperators = None, robin: StateSolution = None,
                       tol: float = DEFAULT_TOL) -> FlawWitness:
    """
    Scan v = s u_R for the first s where beta ||v||^2 + lambda |U|^{1/2} ||v|| exceeds
    max{beta, lambda |U|^{1/2}} ||v|| (norms on Sigma): a quadratic term outgrows the linear box.
    """
    ops = operators or FemOperators(mesh)
    robin = robin or solve_robin(mesh, p, ops, tol=tol)
    grid = np.sort(np.asarray(DEFAULT_SCALES if s_grid is None else s_grid, dtype=float))
    n = float(ops.boundary_l2(robin.u))
    linear = p.lam * math.sqrt(holdall_area)
    box = max(p.beta, linear)
    if n == 0.0:
        logger.info("Robin trace vanishes on Sigma; the scaling probe is degenerate")
        return FlawWitness(False, True, None, None, None, 0.0, None)
    threshold = (box - linear) / (p.beta * n)
    for s in grid:
        true_sum = p.beta * (s * n) ** 2 + linear * s * n
        boxed = box * s * n
        if true_sum > boxed:
            return FlawWitness(True, False, float(s), true_sum, boxed, n, threshold)
    logger.warning("No violation of the boxed bound up to s=%g", grid[-1])
    return FlawWitness(False, False, None, None, None, n, threshold)


# --- corrected chain ---

@dataclass(frozen=True)
class InequalityLink:
    """One recorded inequality lhs <= rhs with its relative slack (rhs - lhs) / max(|lhs|, |rhs|)."""
    name: str
    lhs: float
    rhs: float
    slack: float
    enforced: bool = True
    constants: Dict[str, float] = field(default_factory=dict)


def _link(name, lhs, rhs, enforced=True, **constants) -> InequalityLink:
    return InequalityLink(name, float(lhs), float(rhs), _relative_slack(lhs, rhs), enforced, constants)


@dataclass(frozen=True)
class AuditReport:
    terms: Dict[str, float]
    constants: Dict[str, float]
    norms: Dict[str, float]
    links: List[InequalityLink]
    identity_residual: float
    literal: LiteralAudit
    witness: FlawWitness
    pf: PfEstimate
    trace_certification: Certification
    violations: List[str]

    @property
    def bound(self) -> float:
        return self.constants['C']

    def link(self, name: str) -> InequalityLink:
        return next(link for link in self.links if link.name == name)

    def as_dict(self) -> dict:
        return asdict(self)


def audit_consistent_chain(mesh: Mesh, p: PhysicsParams, holdall_area: float, pf: PfEstimate = None,
                           c_tr: float = None, s_grid: Sequence[float] = None,
                           operators: FemOperators = None, tol: float = DEFAULT_TOL,
                           samples: int = CERTIFICATION_SAMPLES, seed: int = 42,
                           strict: bool = True) -> AuditReport:
    """
    Run the boundedness chain on w_R (zero on Gamma, so an admissible test function):
      a(w,w) + beta a_Sigma(w,w) >= C1 (|w|^2 + (int w)^2)       C1 = min{1, beta / m(Sigma)}
                                 >= C1/2 (|w| + |int w|)^2
                                 >= C2 ||w||^2                    C2 = C1 / (2 C_pf^2)
      a(w,w) + beta a_Sigma(w,w)  = int_Sigma (g - beta) w       <= C3 ||w||
      C3 = (||u0||^2_{H^1(U)} + (lambda + beta)^2 m(Sigma) C_tr^2)^{1/2}
    hence ||w|| <= C3 / C2 and ||u_R|| <= C3 / C2 + ||1||_{H^1(Omega)}.
    """
    ops = operators or FemOperators(mesh)
    pf = pf or estimate_pf_constant(mesh, ops, samples=samples, seed=seed)
    c_tr = c_tr if c_tr is not None else estimate_trace_constant(mesh, ops, seed=seed)
    trace_certification = certify_trace_constant(mesh, c_tr, ops, samples=samples, seed=seed)

    robin = solve_robin(mesh, p, ops, tol=tol)
    K, M, Ms, b = ops.stiffness, ops.mass, ops.boundary_mass, ops.sigma_weights
    w = robin.w
    g = p.flux

    ones = np.ones(mesh.node_count)
    volume = max(float(w @ (K @ w)), 0.0)
    trace_sq = max(float(w @ (Ms @ w)), 0.0)
    boundary = p.beta * trace_sq
    lifting = -float(ones @ (K @ w))
    sigma_integral = float(b @ w)
    # (g - beta) int_Sigma w, with the same discrete datum the solver used
    flux = float((g * b - p.beta * (Ms @ ones)) @ w)
    identity_scale = max(volume + boundary, abs(flux), abs(lifting))
    identity_residual = (abs(volume + boundary - lifting - flux) / identity_scale
                         if identity_scale > 0.0 else 0.0)

    seminorm = math.sqrt(volume)
    w_h1 = math.sqrt(volume + max(float(w @ (M @ w)), 0.0))
    trace = math.sqrt(trace_sq)
    u_h1 = float(ops.h1_norm(robin.u))

    m_sigma = ops.sigma_length
    C_pf = pf.C_pf
    C1 = min(1.0, p.beta / m_sigma)
    C2 = C1 / (2.0 * C_pf ** 2)
    C2_printed = 0.5 * C1
    u0_norm = math.sqrt(holdall_area)  # ||1||_{H^1(U)}: zero gradient, L2 norm of 1 over U
    C3 = math.sqrt(u0_norm ** 2 + (p.lam + p.beta) ** 2 * m_sigma * c_tr ** 2)
    C3_printed = math.sqrt(u0_norm ** 2 + p.lam ** 2 * holdall_area)
    C_w = C3 / C2
    one_norm = math.sqrt(ops.domain_area)
    C = C_w + one_norm
    C_printed = C3_printed / C2_printed

    coercive = volume + boundary
    links = [
        _link('coercivity', C1 * (volume + sigma_integral ** 2), coercive, C1=C1),
        _link('quadratic_mean', 0.5 * (seminorm + abs(sigma_integral)) ** 2, volume + sigma_integral ** 2),
        _link('poincare_friedrichs', w_h1, C_pf * (abs(sigma_integral) + seminorm), C_pf=C_pf),
        _link('corrected_coercivity', C2 * w_h1 ** 2, coercive, C2=C2),
        _link('energy_identity', coercive, abs(flux) + abs(lifting)),
        _link('cauchy_schwarz', abs(flux), abs(g - p.beta) * math.sqrt(m_sigma) * trace),
        _link('trace', trace, c_tr * w_h1, C_tr=c_tr),
        _link('corrected_flux_bound', abs(flux) + abs(lifting), C3 * w_h1, C3=C3),
        _link('lifted_bound', w_h1, C_w, C3=C3, C2=C2),
        _link('solution_bound', u_h1, C, C=C),
        _link('printed_coercivity', C2_printed * w_h1 ** 2, coercive, enforced=False, C2=C2_printed),
        _link('printed_bound', u_h1, C_printed, enforced=False, C=C_printed),
    ]
    violations = [link.name for link in links if link.enforced and link.slack < -SLACK_TOL]

    literal = audit_literal_substitution(mesh, p, holdall_area, ops, tol=tol)
    witness = flawed_bound_probe(mesh, p, holdall_area, s_grid, ops, robin=robin, tol=tol)

    report = AuditReport(
        terms={
            'volume_energy': volume,
            'boundary_energy': boundary,
            'lifting_term': lifting,
            'flux_term': flux,
        },
        constants={
            'C1': C1, 'C2': C2, 'C2_printed': C2_printed, 'C3': C3, 'C3_printed': C3_printed,
            'C_lifted': C_w, 'C': C, 'C_printed': C_printed, 'C_pf': C_pf, 'C_tr': c_tr,
            'm_sigma': m_sigma, 'holdall_area': holdall_area, 'domain_area': ops.domain_area,
            'u0_norm_holdall': u0_norm,
        },
        norms={
            'u_R_h1': u_h1,
            'u_R_sigma_l2': float(ops.boundary_l2(robin.u)),
            'w_R_h1': w_h1,
            'w_R_seminorm': seminorm,
            'w_R_sigma_l2': trace,
            'w_R_sigma_integral': sigma_integral,
        },
        links=links,
        identity_residual=identity_residual,
        literal=literal,
        witness=witness,
        pf=pf,
        trace_certification=trace_certification,
        violations=violations,
    )
    if violations:
        logger.error("Corrected chain violated on %s", ", ".join(violations))
        if strict:
            raise AuditSlackError(f"negative slack on {', '.join(violations)}", report=report)
    return report


# --- uniform bound over a family of domains ---

@dataclass(frozen=True)
class SurveyRow:
    index: int
    mean_radius: float
    harmonic_norm: float
    u_R_h1: float
    C: float
    slack: float
    C_pf: float
    C_tr: float
    violations: List[str]


@dataclass(frozen=True)
class SurveyTable:
    rows: List[SurveyRow]
    max_norm: float
    max_C: float
    bounded: bool

    def as_dict(self) -> dict:
        return asdict(self)


def uniform_bound_survey(family: Sequence[DomainSpec], p: PhysicsParams, n_r: int, n_theta: int,
                         limits: AdmissibilityLimits = None, samples: int = CERTIFICATION_SAMPLES,
                         seed: int = 42, workers: int = 1, tol: float = DEFAULT_TOL) -> SurveyTable:
    """Audit every domain of the family and check one finite C (the largest) dominates every norm."""
    if not family:
        raise GeometryError("survey needs at least one domain")
    limits = limits or AdmissibilityLimits()
    holdall = {spec.holdall_radius for spec in family}
    if len(holdall) != 1:
        raise GeometryError("every domain of a survey must share the hold-all disk")
    for index, spec in enumerate(family):
        violations = validate_admissible(spec, limits)
        if violations:
            raise GeometryError(f"family member {index} is inadmissible: {violations[0].message}")
    holdall_area = family[0].holdall_area

    def audit_one(item):
        index, spec = item
        mesh = generate_mesh(spec, n_r, n_theta)
        report = audit_consistent_chain(mesh, p, holdall_area, samples=samples, seed=seed,
                                        tol=tol, strict=False)
        final = report.link('solution_bound')
        return SurveyRow(index, spec.mean_radius, spec.harmonic_norm(), report.norms['u_R_h1'],
                         report.bound, final.slack, report.pf.C_pf, report.constants['C_tr'],
                         report.violations)

    items = list(enumerate(family))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(audit_one, items))
    else:
        rows = [audit_one(item) for item in items]
    rows.sort(key=lambda row: row.index)

    max_norm = max(row.u_R_h1 for row in rows)
    max_C = max(row.C for row in rows)
    bounded = max_norm <= max_C and all(not row.violations for row in rows)
    logger.info("Survey of %d domains: max ||u_R||=%.6g, max C=%.6g", len(rows), max_norm, max_C)
    return SurveyTable(rows, max_norm, max_C, bounded)
