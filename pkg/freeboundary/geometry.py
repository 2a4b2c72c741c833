"""
Annular domains with a fixed inner circle and a Fourier-parametrized outer boundary,
plus the structured triangulation used by every solver in the package.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .exceptions import GeometryError

logger = logging.getLogger(__name__)

SAMPLE_ANGLES = 720
MIN_SAMPLE_ANGLES = 8
PERIMETER_QUADRATURE_POINTS = 4096
MIN_THETA = 4
MAX_REDRAWS = 100


class Boundary(str, Enum):
    GAMMA = 'gamma'  # fixed inner circle, u = 1
    SIGMA = 'sigma'  # free outer boundary


@dataclass(frozen=True)
class DomainSpec:
    """
    Annulus between the circle r = inner_radius and the radial graph
    rho(theta) = sum_k cos_k cos(k theta) + sin_k sin(k theta), inside the disk r < holdall_radius.
    """
    inner_radius: float
    fourier: Tuple[Tuple[float, float], ...]
    holdall_radius: float

    @property
    def harmonics(self) -> int:
        return len(self.fourier) - 1

    @property
    def mean_radius(self) -> float:
        return self.fourier[0][0]

    @property
    def holdall_area(self) -> float:
        return math.pi * self.holdall_radius ** 2

    def is_concentric(self) -> bool:
        return all(c == 0.0 and s == 0.0 for c, s in self.fourier[1:])

    def radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        rho = np.zeros_like(theta)
        for k, (c, s) in enumerate(self.fourier):
            rho = rho + c * np.cos(k * theta) + s * np.sin(k * theta)
        return rho

    def radius_derivative(self, theta):
        theta = np.asarray(theta, dtype=float)
        drho = np.zeros_like(theta)
        for k, (c, s) in enumerate(self.fourier[1:], start=1):
            drho = drho + k * (s * np.cos(k * theta) - c * np.sin(k * theta))
        return drho

    def harmonic_norm(self) -> float:
        return math.sqrt(sum(c * c + s * s for c, s in self.fourier[1:]))

    def parameter_vector(self) -> np.ndarray:
        """Flat shape parameters [c0, cos_1, sin_1, ..., cos_K, sin_K]."""
        values = [self.fourier[0][0]]
        for c, s in self.fourier[1:]:
            values.extend((c, s))
        return np.array(values, dtype=float)

    def with_parameters(self, x) -> 'DomainSpec':
        x = np.asarray(x, dtype=float)
        if x.shape != (1 + 2 * self.harmonics,):
            raise GeometryError(
                f"expected {1 + 2 * self.harmonics} shape parameters, got {x.shape}"
            )
        pairs = [(float(x[0]), 0.0)]
        pairs += [(float(x[2 * k - 1]), float(x[2 * k])) for k in range(1, self.harmonics + 1)]
        return build_domain(self.inner_radius, pairs, self.holdall_radius)

    def with_harmonics(self, count: int) -> 'DomainSpec':
        """Pad (or keep) the coefficient list so that harmonics k = 1..count exist."""
        if count <= self.harmonics:
            return self
        pairs = list(self.fourier) + [(0.0, 0.0)] * (count - self.harmonics)
        return DomainSpec(self.inner_radius, tuple(pairs), self.holdall_radius)


@dataclass(frozen=True)
class AdmissibilityLimits:
    delta_gap: float = 0.1
    max_fourier_norm: float = 1.0
    max_perimeter: float = 100.0
    samples: int = SAMPLE_ANGLES  # angles sampled for the gap and hold-all checks

    def __post_init__(self):
        for name in ('delta_gap', 'max_fourier_norm', 'max_perimeter'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise GeometryError(f"{name} must be strictly positive, got {value}")
        if int(self.samples) != self.samples or self.samples < MIN_SAMPLE_ANGLES:
            raise GeometryError(f"samples must be an integer >= {MIN_SAMPLE_ANGLES}, got {self.samples}")


@dataclass(frozen=True)
class Violation:
    kind: str  # gap | holdall | fourier_norm | perimeter
    message: str
    value: float
    limit: float


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation of the annulus; node (i, j) has index j * n_theta + i."""
    nodes: np.ndarray
    triangles: np.ndarray
    gamma_edges: np.ndarray
    sigma_edges: np.ndarray
    n_r: int
    n_theta: int

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    @property
    def gamma_nodes(self) -> np.ndarray:
        return np.unique(self.gamma_edges)

    @property
    def sigma_nodes(self) -> np.ndarray:
        return np.unique(self.sigma_edges)

    def boundary_edges(self, which: Boundary) -> np.ndarray:
        return self.gamma_edges if Boundary(which) is Boundary.GAMMA else self.sigma_edges

    def edge_lengths(self, which: Boundary) -> np.ndarray:
        edges = self.boundary_edges(which)
        return np.linalg.norm(self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]], axis=1)

    def signed_areas(self) -> np.ndarray:
        p0 = self.nodes[self.triangles[:, 0]]
        p1 = self.nodes[self.triangles[:, 1]]
        p2 = self.nodes[self.triangles[:, 2]]
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                      - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def same_as(self, other: 'Mesh') -> bool:
        if self is other:
            return True
        return (self.nodes.shape == other.nodes.shape
                and self.triangles.shape == other.triangles.shape
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.triangles, other.triangles))

    def to_text(self) -> str:
        """Plain-text export: header, node coordinates, triangles, then the tagged edge lists."""
        lines = [f"nodes {self.node_count} triangles {self.triangle_count}"]
        lines += [f"{x!r} {y!r}" for x, y in self.nodes.tolist()]
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles.tolist()]
        lines.append(f"gamma_edges {len(self.gamma_edges)}")
        lines += [f"{i} {j}" for i, j in self.gamma_edges.tolist()]
        lines.append(f"sigma_edges {len(self.sigma_edges)}")
        lines += [f"{i} {j}" for i, j in self.sigma_edges.tolist()]
        return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, handle) -> None:
    handle.write(mesh.to_text())


def _sample_angles(samples: int) -> np.ndarray:
    if samples < MIN_SAMPLE_ANGLES:
        raise GeometryError(f"need at least {MIN_SAMPLE_ANGLES} sample angles, got {samples}")
    return np.linspace(0.0, 2.0 * np.pi, int(samples), endpoint=False)


def build_domain(a: float, fourier: Iterable[Sequence[float]], R_U: float) -> DomainSpec:
    """Build a DomainSpec; admissibility is checked separately by validate_admissible."""
    try:
        pairs = tuple((float(c), float(s)) for c, s in fourier)
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"fourier coefficients must be (cos, sin) pairs: {exc}") from exc
    if not pairs:
        raise GeometryError("fourier needs at least the mean radius coefficient")
    values = [float(a), float(R_U)] + [v for pair in pairs for v in pair]
    if not all(math.isfinite(v) for v in values):
        raise GeometryError("domain parameters must be finite")
    if a <= 0:
        raise GeometryError(f"inner radius must be positive, got {a}")
    if R_U <= a:
        raise GeometryError(f"hold-all radius {R_U} must exceed the inner radius {a}")
    # sin(0 * theta) vanishes, so the k = 0 sine slot carries no information
    pairs = ((pairs[0][0], 0.0),) + pairs[1:]
    return DomainSpec(float(a), pairs, float(R_U))


def boundary_measure(spec: DomainSpec, which: Boundary) -> float:
    """Length of Gamma (2 pi a) or of Sigma by periodic trapezoid quadrature of sqrt(rho^2 + rho'^2)."""
    if Boundary(which) is Boundary.GAMMA:
        return 2.0 * math.pi * spec.inner_radius
    theta = np.linspace(0.0, 2.0 * np.pi, PERIMETER_QUADRATURE_POINTS, endpoint=False)
    speed = np.hypot(spec.radius(theta), spec.radius_derivative(theta))
    return float(speed.sum() * (2.0 * np.pi / PERIMETER_QUADRATURE_POINTS))


def validate_admissible(spec: DomainSpec, lim: AdmissibilityLimits,
                        samples: int = None) -> List[Violation]:
    """Return the admissibility violations of spec (an empty list means admissible)."""
    theta = _sample_angles(lim.samples if samples is None else samples)
    rho = spec.radius(theta)
    violations = []

    min_rho = float(rho.min())
    if min_rho - spec.inner_radius < lim.delta_gap:
        violations.append(Violation(
            'gap',
            f"min rho {min_rho:.6g} is closer than {lim.delta_gap:g} to the inner radius {spec.inner_radius:g}",
            min_rho, spec.inner_radius + lim.delta_gap,
        ))

    max_rho = float(rho.max())
    if max_rho > spec.holdall_radius - lim.delta_gap:
        violations.append(Violation(
            'holdall',
            f"max rho {max_rho:.6g} leaves the hold-all disk of radius {spec.holdall_radius:g}",
            max_rho, spec.holdall_radius - lim.delta_gap,
        ))

    norm = spec.harmonic_norm()
    if norm > lim.max_fourier_norm:
        violations.append(Violation(
            'fourier_norm', f"harmonic coefficient norm {norm:.6g} exceeds {lim.max_fourier_norm:g}",
            norm, lim.max_fourier_norm,
        ))

    perimeter = boundary_measure(spec, Boundary.SIGMA)
    if perimeter > lim.max_perimeter:
        violations.append(Violation(
            'perimeter', f"perimeter {perimeter:.6g} exceeds {lim.max_perimeter:g}",
            perimeter, lim.max_perimeter,
        ))
    return violations


def generate_mesh(spec: DomainSpec, n_r: int, n_theta: int) -> Mesh:
    """
    Transfinite annular grid: node (i, j) sits at radius a + (j / n_r)(rho(theta_i) - a),
    theta_i = 2 pi i / n_theta; every quad is split along its (i, j)-(i+1, j+1) diagonal.
    """
    if n_r < 1 or n_theta < MIN_THETA:
        raise GeometryError(f"mesh resolution needs n_r >= 1 and n_theta >= {MIN_THETA}, got ({n_r}, {n_theta})")
    a = spec.inner_radius
    if float(spec.radius(_sample_angles(SAMPLE_ANGLES)).min()) <= a:
        raise GeometryError("outer boundary touches or crosses the inner circle")

    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    rho = spec.radius(theta)
    t = np.arange(n_r + 1) / n_r
    r = a + np.outer(t, rho - a)
    nodes = np.column_stack(((r * np.cos(theta)).ravel(), (r * np.sin(theta)).ravel()))

    i = np.arange(n_theta)
    ip = (i + 1) % n_theta
    j = np.arange(n_r)[:, None]
    p00 = (j * n_theta + i).ravel()
    p10 = (j * n_theta + ip).ravel()
    p01 = ((j + 1) * n_theta + i).ravel()
    p11 = ((j + 1) * n_theta + ip).ravel()
    triangles = np.empty((2 * n_r * n_theta, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack((p00, p11, p10))
    triangles[1::2] = np.column_stack((p00, p01, p11))

    gamma_edges = np.column_stack((i, ip)).astype(np.int64)
    sigma_edges = np.column_stack((n_r * n_theta + i, n_r * n_theta + ip)).astype(np.int64)

    mesh = Mesh(nodes, triangles, gamma_edges, sigma_edges, int(n_r), int(n_theta))
    areas = mesh.signed_areas()
    if areas.min() <= 0.0:
        raise GeometryError(f"mesh has {int((areas <= 0).sum())} triangles with non-positive area")
    logger.debug("Generated mesh n_r=%d n_theta=%d (%d nodes)", n_r, n_theta, mesh.node_count)
    return mesh


def domain_distance(s1: DomainSpec, s2: DomainSpec, samples: int = SAMPLE_ANGLES) -> float:
    """Max over sampled angles of |rho1 - rho2| (Hausdorff surrogate for radial graphs)."""
    if not math.isclose(s1.inner_radius, s2.inner_radius, rel_tol=0.0, abs_tol=1e-14):
        raise GeometryError("domain_distance needs the same inner radius")
    theta = _sample_angles(samples)
    return float(np.max(np.abs(s1.radius(theta) - s2.radius(theta))))


def concentric_family(a: float, radii: Iterable[float], R_U: float) -> List[DomainSpec]:
    return [build_domain(a, [(R, 0.0)], R_U) for R in radii]


def random_family(base: DomainSpec, count: int, max_harmonic: int = 3, amplitude: float = 0.2,
                  seed: int = 42, limits: AdmissibilityLimits = None) -> List[DomainSpec]:
    """
    Perturb base by harmonics k = 1..max_harmonic, each with modulus drawn from [0, amplitude]
    and a uniform phase. Inadmissible draws are redrawn from the same generator.
    """
    limits = limits or AdmissibilityLimits()
    rng = np.random.default_rng(seed)
    padded = base.with_harmonics(max_harmonic)
    family = []
    for index in range(count):
        for _ in range(MAX_REDRAWS):
            moduli = rng.uniform(0.0, amplitude, max_harmonic)
            phases = rng.uniform(0.0, 2.0 * np.pi, max_harmonic)
            pairs = [padded.fourier[0]]
            for k in range(1, padded.harmonics + 1):
                c, s = padded.fourier[k]
                if k <= max_harmonic:
                    c += moduli[k - 1] * np.cos(phases[k - 1])
                    s += moduli[k - 1] * np.sin(phases[k - 1])
                pairs.append((c, s))
            candidate = build_domain(base.inner_radius, pairs, base.holdall_radius)
            if not validate_admissible(candidate, limits):
                family.append(candidate)
                break
        else:
            raise GeometryError(f"could not draw an admissible family member {index} in {MAX_REDRAWS} tries")
    return family
