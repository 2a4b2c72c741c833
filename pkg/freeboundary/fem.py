"""
P1 finite elements on triangle meshes: assembly of the stiffness, mass and boundary-mass
matrices, Dirichlet elimination with a lifting, a Jacobi-preconditioned conjugate gradient
solver, and the norm / trace functionals built on those matrices.
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .exceptions import AssemblyError, DirichletError, SolverDivergenceError
from .geometry import Boundary, Mesh

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
AREA_EPS = 1e-14


def _symmetric(matrix) -> sparse.csr_matrix:
    # a_ij and a_ji end up as the same floating point sum
    matrix = sparse.csr_matrix(matrix)
    return sparse.csr_matrix(0.5 * (matrix + matrix.T))


def _element_geometry(mesh: Mesh):
    """Per-triangle areas and the (b, c) coefficients of the barycentric gradients."""
    p = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    b = np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)  # y_j - y_k
    c = np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)  # x_k - x_j
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    if np.any(area <= AREA_EPS):
        bad = int(np.argmin(area))
        raise AssemblyError(f"degenerate triangle {bad} with area {area[bad]:.3e}")
    return area, b, c


def _scatter(mesh: Mesh, local: np.ndarray) -> sparse.csr_matrix:
    """Sum (T, 3, 3) element blocks into a global matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.node_count
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def element_stiffness(mesh: Mesh) -> np.ndarray:
    area, b, c = _element_geometry(mesh)
    return (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area)[:, None, None]


def assemble_stiffness(mesh: Mesh) -> sparse.csr_matrix:
    """K_ij = sum over triangles of the integral of grad(phi_i) . grad(phi_j)."""
    return _symmetric(_scatter(mesh, element_stiffness(mesh)))


def assemble_mass(mesh: Mesh) -> sparse.csr_matrix:
    """Exact P1 volume mass matrix, (area / 12) [[2,1,1],[1,2,1],[1,1,2]] per triangle."""
    area, _, _ = _element_geometry(mesh)
    block = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _symmetric(_scatter(mesh, area[:, None, None] * block))


def assemble_boundary_mass(mesh: Mesh, which: Boundary = Boundary.SIGMA) -> sparse.csr_matrix:
    """Exact edge mass, (L / 6) [[2,1],[1,2]] per boundary edge; zero rows off the boundary."""
    edges = mesh.boundary_edges(which)
    length = mesh.edge_lengths(which)
    block = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    data = (length[:, None, None] * block).ravel()
    rows = np.repeat(edges, 2, axis=1).ravel()
    cols = np.tile(edges, (1, 2)).ravel()
    n = mesh.node_count
    return _symmetric(sparse.coo_matrix((data, (rows, cols)), shape=(n, n)))


def assemble_boundary_load(mesh: Mesh, g: float, which: Boundary = Boundary.SIGMA) -> np.ndarray:
    """Load of a constant flux g: each boundary node gets g times half its incident edge lengths."""
    if not np.isfinite(g):
        raise AssemblyError(f"boundary flux must be finite, got {g}")
    edges = mesh.boundary_edges(which)
    half = 0.5 * mesh.edge_lengths(which)
    load = np.zeros(mesh.node_count)
    np.add.at(load, edges[:, 0], half)
    np.add.at(load, edges[:, 1], half)
    return g * load


@dataclass(frozen=True)
class ReducedSystem:
    """Free-node block of a Dirichlet-constrained system and the bookkeeping to undo it."""
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    constrained: np.ndarray
    lifting: np.ndarray

    def expand(self, w_free: np.ndarray) -> np.ndarray:
        """Lifted part w on all nodes (zero on constrained nodes)."""
        w = np.zeros(self.lifting.shape[0])
        w[self.free] = w_free
        return w

    def reassemble(self, w_free: np.ndarray) -> np.ndarray:
        return self.expand(w_free) + self.lifting


def apply_dirichlet(matrix, rhs: np.ndarray, nodes, value: float) -> ReducedSystem:
    """
    Eliminate the constrained rows/columns with the constant lifting u0 = value on every node:
    solve A_ff w = (rhs - A u0)_f, then u = w + u0 with w = 0 on the constrained nodes.
    """
    matrix = sparse.csr_matrix(matrix)
    n = matrix.shape[0]
    constrained = np.unique(np.asarray(nodes, dtype=np.int64))
    if constrained.size == 0:
        raise DirichletError("Dirichlet elimination needs at least one constrained node")
    mask = np.ones(n, dtype=bool)
    mask[constrained] = False
    free = np.flatnonzero(mask)

    lifting = np.full(n, float(value))
    correction = (matrix @ lifting)[free]
    reduced = matrix[free][:, free].tocsr()
    return ReducedSystem(reduced, np.asarray(rhs, dtype=float)[free] - correction,
                         free, constrained, lifting)


@dataclass(frozen=True)
class PcgResult:
    x: np.ndarray
    iterations: int
    relative_residual: float


def pcg(A, b: np.ndarray, tol: float = DEFAULT_TOL, max_iters: int = None, x0: np.ndarray = None,
        diagonal: np.ndarray = None) -> PcgResult:
    """
    Conjugate gradients with Jacobi preconditioning. Stops once ||A x - b|| <= tol ||b||;
    raises SolverDivergenceError on non-positive curvature or when the cap (10 n) is hit.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    max_iters = max_iters or 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return PcgResult(np.zeros(n), 0, 0.0)

    if diagonal is None:
        diagonal = A.diagonal()
    if np.any(diagonal <= 0):
        raise SolverDivergenceError("matrix has a non-positive diagonal entry; not SPD")
    inv_diag = 1.0 / diagonal

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = inv_diag * r
    d = z.copy()
    rz = r @ z
    for k in range(max_iters):
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            return PcgResult(x, k, rnorm / bnorm)
        q = A @ d
        curvature = d @ q
        if curvature <= 0:
            raise SolverDivergenceError(
                f"non-positive curvature {curvature:.3e} at iteration {k}; system is not SPD",
                iterations=k, residual=rnorm / bnorm,
            )
        alpha = rz / curvature
        x += alpha * d
        r -= alpha * q
        z = inv_diag * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new

    # recompute the true residual before giving up
    residual = np.linalg.norm(b - A @ x) / bnorm
    if residual <= tol:
        return PcgResult(x, max_iters, residual)
    logger.warning("PCG stopped after %d iterations at relative residual %.3e", max_iters, residual)
    raise SolverDivergenceError(
        f"conjugate gradients did not converge in {max_iters} iterations (residual {residual:.3e})",
        iterations=max_iters, residual=residual,
    )


def solve_spd(A, b: np.ndarray, tol: float = DEFAULT_TOL, max_iters: int = None) -> np.ndarray:
    return pcg(A, b, tol=tol, max_iters=max_iters).x


class FemOperators:
    """Lazily assembled matrices of one mesh plus the norms and trace functionals built from them."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        return assemble_stiffness(self.mesh)

    @cached_property
    def mass(self) -> sparse.csr_matrix:
        return assemble_mass(self.mesh)

    @cached_property
    def boundary_mass(self) -> sparse.csr_matrix:
        return assemble_boundary_mass(self.mesh, Boundary.SIGMA)

    @cached_property
    def sigma_weights(self) -> np.ndarray:
        """b = M_Sigma 1, so that b . v is the integral of v over Sigma."""
        return assemble_boundary_load(self.mesh, 1.0, Boundary.SIGMA)

    @cached_property
    def sigma_length(self) -> float:
        return float(self.sigma_weights.sum())

    @cached_property
    def domain_area(self) -> float:
        return self.mesh.area()

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.mesh.node_count:
            raise AssemblyError(f"field has {v.shape[0]} entries, mesh has {self.mesh.node_count} nodes")
        return v

    def _quadratic(self, matrix, v) -> np.ndarray:
        v = self._check(v)
        # columns of a 2-D array are treated as separate fields
        value = np.einsum('i...,i...->...', v, matrix @ v)
        return np.maximum(value, 0.0)

    def h1_seminorm(self, v):
        return np.sqrt(self._quadratic(self.stiffness, v))

    def l2_norm(self, v):
        return np.sqrt(self._quadratic(self.mass, v))

    def h1_norm(self, v):
        return np.sqrt(self._quadratic(self.stiffness, v) + self._quadratic(self.mass, v))

    def trace_integral(self, v):
        return self.sigma_weights @ self._check(v)

    def boundary_l2(self, v):
        return np.sqrt(self._quadratic(self.boundary_mass, v))


def h1_seminorm(mesh: Mesh, v) -> float:
    return float(FemOperators(mesh).h1_seminorm(v))


def l2_norm(mesh: Mesh, v) -> float:
    return float(FemOperators(mesh).l2_norm(v))


def h1_norm(mesh: Mesh, v) -> float:
    return float(FemOperators(mesh).h1_norm(v))


def trace_integral(mesh: Mesh, v, which: Boundary = Boundary.SIGMA) -> float:
    return float(assemble_boundary_load(mesh, 1.0, which) @ np.asarray(v, dtype=float))


def boundary_l2(mesh: Mesh, v, which: Boundary = Boundary.SIGMA) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(max(v @ (assemble_boundary_mass(mesh, which) @ v), 0.0)))


def gamma_reaction_flux(mesh: Mesh, matrix, u: np.ndarray, load: np.ndarray) -> float:
    """Variationally consistent flux through Gamma: sum over Gamma nodes of (A u - f)_i."""
    residual = matrix @ u - load
    return float(residual[mesh.gamma_nodes].sum())


def write_coo(matrix, handle) -> None:
    """Dump a sparse matrix as `row col value` lines for debugging."""
    coo = sparse.coo_matrix(matrix)
    handle.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
    for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
        handle.write(f"{i} {j} {v!r}\n")
