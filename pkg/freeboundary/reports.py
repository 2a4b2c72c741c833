"""
Deterministic run artifacts: JSON/CSV/text files written atomically, a manifest with
sha256 digests, and static SVG plots.
"""
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
SVG_HASH_SALT = 'bfb'
BOUNDARY_SAMPLES = 361
MAX_BOUNDARY_CURVES = 8


def to_jsonable(value):
    """Plain-JSON view of numpy scalars/arrays, dataclasses and tuples; non-finite floats become null."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        if hasattr(value, 'as_dict'):
            return to_jsonable(value.as_dict())
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if hasattr(value, 'value') and isinstance(getattr(value, 'value'), str):  # str enums
        return value.value
    return value


def dumps(data) -> str:
    return json.dumps(to_jsonable(data), indent=2, allow_nan=False) + '\n'


class ReportWriter:
    """Writes the artifacts of one command into out_dir and remembers them for the manifest."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.artifacts: List[dict] = []

    def _write_bytes(self, name: str, payload: bytes, kind: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        target = self.out_dir / name
        fd, tmp = tempfile.mkstemp(prefix=f'.{name}.', dir=self.out_dir)
        try:
            with os.fdopen(fd, 'wb') as handle:
                handle.write(payload)
            os.replace(tmp, target)
        except OSError:
            logger.exception("Could not write %s", target)
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.artifacts = [a for a in self.artifacts if a['name'] != name]
        self.artifacts.append({
            'name': name,
            'kind': kind,
            'sha256': hashlib.sha256(payload).hexdigest(),
            'size': len(payload),
        })
        logger.debug("Wrote %s (%d bytes)", target, len(payload))
        return target

    def write_json(self, name: str, data) -> Path:
        return self._write_bytes(name, dumps(data).encode('utf-8'), 'json')

    def write_text(self, name: str, text: str) -> Path:
        return self._write_bytes(name, text.encode('utf-8'), 'txt')

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return self._write_bytes(name, buffer.getvalue().encode('utf-8'), 'csv')

    def write_svg(self, name: str, figure: Figure) -> Path:
        buffer = io.BytesIO()
        with matplotlib.rc_context({'svg.hashsalt': SVG_HASH_SALT, 'svg.fonttype': 'path'}):
            figure.savefig(buffer, format='svg', metadata={'Date': None})
        return self._write_bytes(name, buffer.getvalue(), 'svg')

    def write_manifest(self) -> Path:
        # the manifest lists every other file of the run, not itself
        listed = sorted((a for a in self.artifacts if a['name'] != MANIFEST_NAME), key=lambda a: a['name'])
        return self._write_bytes(MANIFEST_NAME, dumps({'files': listed}).encode('utf-8'), 'json')


def boundary_figure(specs, title: str = 'Free boundary evolution') -> Figure:
    """Outer boundaries of the given domains (first, evenly spaced intermediates, last) and Gamma."""
    figure = Figure(figsize=(5, 5))
    ax = figure.add_subplot()
    theta = np.linspace(0.0, 2.0 * np.pi, BOUNDARY_SAMPLES)
    if len(specs) > MAX_BOUNDARY_CURVES:
        picks = np.unique(np.linspace(0, len(specs) - 1, MAX_BOUNDARY_CURVES).round().astype(int))
        specs = [specs[i] for i in picks]
    for index, spec in enumerate(specs):
        rho = spec.radius(theta)
        last = index == len(specs) - 1
        ax.plot(rho * np.cos(theta), rho * np.sin(theta), color='C3' if last else 'C0',
                alpha=1.0 if last or index == 0 else 0.35, linewidth=1.5 if last else 1.0)
    a = specs[0].inner_radius
    ax.plot(a * np.cos(theta), a * np.sin(theta), color='k', linewidth=1.0)
    ax.set_aspect('equal')
    ax.set_title(title)
    return figure


def cost_history_figure(trajectory) -> Figure:
    figure = Figure(figsize=(6, 4))
    ax = figure.add_subplot()
    accepted = [r for r in trajectory.records if r.accepted]
    values = [max(r.J, 1e-300) for r in accepted]
    ax.semilogy([r.iteration for r in accepted], values, marker='o')
    ax.set_xlabel('iteration')
    ax.set_ylabel('J')
    ax.set_title(f'Energy gap ({trajectory.method})')
    return figure


def convergence_figure(study) -> Figure:
    figure = Figure(figsize=(6, 4))
    ax = figure.add_subplot()
    h = [row.h for row in study.rows]
    for attr, label in (('neumann_l2', 'Neumann L2'), ('neumann_h1', 'Neumann H1'),
                        ('robin_l2', 'Robin L2'), ('robin_h1', 'Robin H1')):
        ax.loglog(h, [getattr(row, attr) for row in study.rows], marker='o', label=label)
    ax.set_xlabel('h')
    ax.set_ylabel('error')
    ax.legend()
    ax.set_title(f'Convergence on the annulus a={study.a:g}, R={study.R:g}')
    return figure
