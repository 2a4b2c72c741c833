"""Error-versus-h study of both state solvers against the radial oracles on concentric annuli."""
import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Sequence

import numpy as np

from .fem import DEFAULT_TOL, FemOperators
from .geometry import Mesh, build_domain, generate_mesh
from .states import PhysicsParams, RadialSolution, radial_oracle_neumann, radial_oracle_robin, \
    solve_neumann, solve_robin

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (16, 32, 64, 128)

# degree-5 seven-point rule on the reference triangle (barycentric points, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
QUAD_POINTS = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
QUAD_WEIGHTS = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


def field_errors(mesh: Mesh, u_h: np.ndarray, exact: RadialSolution):
    """L2 error and H1-seminorm error of the P1 field u_h against an exact radial solution."""
    tri = mesh.triangles
    corners = mesh.nodes[tri]                               # (T, 3, 2)
    areas = mesh.signed_areas()
    points = np.einsum('qk,tkd->tqd', QUAD_POINTS, corners)  # (T, Q, 2)
    values_h = np.einsum('qk,tk->tq', QUAD_POINTS, u_h[tri])

    x, y = corners[:, :, 0], corners[:, :, 1]
    b = np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)
    c = np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)
    grad_h = np.stack((np.einsum('tk,tk->t', b, u_h[tri]), np.einsum('tk,tk->t', c, u_h[tri])), axis=1)
    grad_h /= (2.0 * areas)[:, None]

    l2_sq = np.einsum('q,tq,t->', QUAD_WEIGHTS, (exact.at_points(points) - values_h) ** 2, areas)
    grad_gap = exact.gradient(points) - grad_h[:, None, :]
    h1_sq = np.einsum('q,tq,t->', QUAD_WEIGHTS, (grad_gap ** 2).sum(axis=2), areas)
    return math.sqrt(l2_sq), math.sqrt(h1_sq)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    n_r: int
    n_theta: int
    h: float
    neumann_l2: float
    neumann_h1: float
    robin_l2: float
    robin_h1: float


@dataclass(frozen=True)
class ConvergenceStudy:
    a: float
    R: float
    rows: List[ConvergenceRow]
    ratios: List[dict]

    def as_dict(self) -> dict:
        return asdict(self)


def convergence_study(a: float, R: float, p: PhysicsParams, levels: Sequence[int] = DEFAULT_LEVELS,
                      radial_divisor: int = 2, tol: float = DEFAULT_TOL) -> ConvergenceStudy:
    """
    Solve on n_theta = n, n_r = n / radial_divisor for every level n and record the errors and the
    ratios of successive errors (4 for second order, 2 for first order).
    """
    spec = build_domain(a, [(R, 0.0)], 2.0 * R)
    neumann = radial_oracle_neumann(a, R, p.flux)
    robin = radial_oracle_robin(a, R, p.flux, p.beta)
    rows = []
    for n in levels:
        n_r = max(1, n // radial_divisor)
        mesh = generate_mesh(spec, n_r, n)
        ops = FemOperators(mesh)
        uN = solve_neumann(mesh, p, ops, tol=tol)
        uR = solve_robin(mesh, p, ops, tol=tol)
        nl2, nh1 = field_errors(mesh, uN.u, neumann)
        rl2, rh1 = field_errors(mesh, uR.u, robin)
        rows.append(ConvergenceRow(n, n_r, n, 2.0 * math.pi * R / n, nl2, nh1, rl2, rh1))
        logger.info("n=%d: neumann L2=%.3e H1=%.3e, robin L2=%.3e H1=%.3e", n, nl2, nh1, rl2, rh1)

    ratios = []
    for coarse, fine in zip(rows, rows[1:]):
        ratios.append({
            'n': fine.n,
            'neumann_l2': coarse.neumann_l2 / fine.neumann_l2,
            'neumann_h1': coarse.neumann_h1 / fine.neumann_h1,
            'robin_l2': coarse.robin_l2 / fine.robin_l2,
            'robin_h1': coarse.robin_h1 / fine.robin_h1,
        })
    return ConvergenceStudy(a, R, rows, ratios)
