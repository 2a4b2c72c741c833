"""Run configuration: JSON file -> per-section form validation -> frozen RunConfig."""
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from django.conf import settings

from .audit import CERTIFICATION_SAMPLES
from .convergence import DEFAULT_LEVELS
from .exceptions import ConfigError, GeometryError
from .forms import FIELD_ALIASES, SECTION_FORMS
from .geometry import AdmissibilityLimits, DomainSpec, build_domain
from .optimizer import OptimConfig
from .states import PhysicsParams

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = frozenset(SECTION_FORMS) | {'output_dir'}
REQUIRED_SECTIONS = ('domain', 'physics')
DEFAULT_S_MAX = 1e4
DEFAULT_S_POINTS = 161


@dataclass(frozen=True)
class DomainSection:
    spec: DomainSpec
    limits: AdmissibilityLimits


@dataclass(frozen=True)
class MeshSection:
    n_r: int = 16
    n_theta: int = 64


@dataclass(frozen=True)
class SolverSection:
    tol: float
    max_iters: Optional[int] = None


@dataclass(frozen=True)
class AuditSection:
    s_max: float = DEFAULT_S_MAX
    s_points: int = DEFAULT_S_POINTS
    samples: int = CERTIFICATION_SAMPLES
    seed: int = 42

    def s_grid(self) -> np.ndarray:
        return np.geomspace(1.0, self.s_max, self.s_points)


@dataclass(frozen=True)
class SurveySection:
    family: str = 'random'
    count: int = 50
    max_harmonic: int = 3
    amplitude: float = 0.2
    seed: int = 42
    radii: Tuple[float, ...] = (1.5, 2.0, 2.5, 3.0)
    workers: int = 1


@dataclass(frozen=True)
class ConvergenceSection:
    a: float = 1.0
    R: float = 2.0
    levels: Tuple[int, ...] = DEFAULT_LEVELS
    radial_divisor: int = 2


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSection
    physics: PhysicsParams
    mesh: MeshSection
    solver: SolverSection
    optimizer: OptimConfig
    audit: AuditSection
    survey: SurveySection
    convergence: ConvergenceSection
    output_dir: str
    sha256: str = ''


def _given(cleaned: dict) -> dict:
    return {k: v for k, v in cleaned.items() if v is not None and v != ''}


def _validate_sections(data: dict) -> dict:
    """Bind every present section to its form; collect all errors before failing."""
    errors = {}
    unknown = sorted(set(data) - TOP_LEVEL_KEYS)
    if unknown:
        errors['__all__'] = {'unknown_keys': [f"unknown top-level key '{key}'" for key in unknown]}
    for name in REQUIRED_SECTIONS:
        if name not in data:
            errors[name] = {'__all__': [f"section '{name}' is required"]}

    cleaned = {}
    for name, form_class in SECTION_FORMS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            errors[name] = {'__all__': ['section must be a JSON object']}
            continue
        aliases = FIELD_ALIASES.get(name, {})
        renamed = {aliases.get(key, key): value for key, value in section.items()}
        extra = sorted(set(renamed) - set(form_class.base_fields))
        if extra:
            errors[name] = {key: ['unknown key'] for key in extra}
            continue
        form = form_class(data=renamed)
        if not form.is_valid():
            errors[name] = {field: list(messages) for field, messages in form.errors.items()}
            continue
        cleaned[name] = form.cleaned_data

    output_dir = data.get('output_dir', settings.BFB_OUTPUT_DIR)
    if not isinstance(output_dir, str) or not output_dir:
        errors['output_dir'] = {'__all__': ['output_dir must be a non-empty string']}
    if errors:
        raise ConfigError('invalid run configuration', errors=errors)
    return cleaned


def parse_run_config(data, sha256: str = '') -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError('run configuration must be a JSON object', errors={'__all__': {'type': ['not an object']}})
    cleaned = _validate_sections(data)

    domain = cleaned['domain']
    try:
        spec = build_domain(domain['a'], domain['fourier'], domain['R_U'])
        limits = AdmissibilityLimits(samples=settings.BFB_SAMPLE_ANGLES,
                                     **_given({k: domain.get(k) for k in
                                               ('delta_gap', 'max_fourier_norm', 'max_perimeter')}))
    except GeometryError as exc:
        raise ConfigError(str(exc), errors={'domain': {'__all__': [str(exc)]}}) from exc

    physics = cleaned['physics']
    params = PhysicsParams(physics['lam'], physics['beta'], physics['flux_sign'])
    solver = _given(cleaned.get('solver', {}))
    survey = _given(cleaned.get('survey', {}))
    if 'radii' in survey:
        survey['radii'] = tuple(survey['radii'])
    convergence = _given(cleaned.get('convergence', {}))
    if 'levels' in convergence:
        convergence['levels'] = tuple(convergence['levels'])
    audit = {'seed': settings.BFB_DEFAULT_SEED, **_given(cleaned.get('audit', {}))}
    survey = {'seed': settings.BFB_DEFAULT_SEED, **survey}

    return RunConfig(
        domain=DomainSection(spec, limits),
        physics=params,
        mesh=MeshSection(**_given(cleaned.get('mesh', {}))),
        solver=SolverSection(**{'tol': settings.BFB_SOLVER_TOL, **solver}),
        optimizer=cleaned.get('optimizer', {}).get('config', OptimConfig()),
        audit=AuditSection(**audit),
        survey=SurveySection(**survey),
        convergence=ConvergenceSection(**convergence),
        output_dir=data.get('output_dir', settings.BFB_OUTPUT_DIR),
        sha256=sha256,
    )


def load_run_config(path) -> RunConfig:
    """Read and validate a JSON run configuration; any problem raises ConfigError."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f'cannot read {path}: {exc}', errors={'__all__': {'file': [str(exc)]}}) from exc
    try:
        data = json.loads(raw.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f'{path} is not valid JSON: {exc}', errors={'__all__': {'json': [str(exc)]}}) from exc
    config = parse_run_config(data, sha256=hashlib.sha256(raw).hexdigest())
    logger.debug("Loaded run configuration %s (sha256 %s)", path, config.sha256)
    return config
