import logging
import math
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from freeboundary.audit import (
    audit_consistent_chain, certify_trace_constant, estimate_pf_constant, estimate_trace_constant,
    uniform_bound_survey,
)
from freeboundary.config import load_run_config
from freeboundary.convergence import convergence_study
from freeboundary.cost import analytic_energy_gap, energy_gap, parameter_labels
from freeboundary.exceptions import (
    AssemblyError, AuditSlackError, ConfigError, DirichletError, GeometryError, MeshMismatchError,
    ShapeGradientError, SolverError,
)
from freeboundary.fem import FemOperators
from freeboundary.geometry import Boundary, boundary_measure, concentric_family, generate_mesh, \
    random_family, validate_admissible
from freeboundary.models import record_run
from freeboundary.optimizer import optimize_shape
from freeboundary.reports import ReportWriter, boundary_figure, convergence_figure, cost_history_figure
from freeboundary.states import bernoulli_radius, solve_neumann, solve_robin

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('solve', 'optimize', 'audit', 'pf', 'convergence', 'survey')
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_AUDIT = 4
SOLUTION_HEADER = ['node_index', 'x', 'y', 'u']


class Command(BaseCommand):
    help = 'Solve, optimize and audit the exterior Bernoulli free boundary problem'

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='subcommand', required=True)
        for name in SUBCOMMANDS:
            sub = subparsers.add_parser(name)
            sub.add_argument('--config', required=True, help='JSON run configuration')
            sub.add_argument('--out', default=None, help='output directory (overrides output_dir)')
            sub.add_argument('--quiet', action='store_true', help='only warnings and errors')

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        quiet = options['quiet']
        if quiet:
            logging.getLogger('freeboundary').setLevel(logging.WARNING)

        try:
            config = load_run_config(options['config'])
        except ConfigError as exc:
            self._fail(subcommand, 'config_error', EXIT_CONFIG, self._describe(exc))

        out_dir = Path(options['out'] or config.output_dir)
        writer = ReportWriter(out_dir)
        runner = getattr(self, f'run_{subcommand}')
        try:
            summary = runner(config, writer)
        except (ConfigError, GeometryError) as exc:
            self._finish(writer, config, subcommand, 'config_error', EXIT_CONFIG)
            self._fail(subcommand, None, EXIT_CONFIG, f'invalid domain or configuration: {exc}')
        except (SolverError, AssemblyError, DirichletError, MeshMismatchError, ShapeGradientError) as exc:
            logger.exception("bfb %s failed", subcommand)
            self._finish(writer, config, subcommand, 'solver_error', EXIT_SOLVER)
            self._fail(subcommand, None, EXIT_SOLVER, f'solver failure: {exc}')
        except AuditSlackError as exc:
            self._finish(writer, config, subcommand, 'audit_violation', EXIT_AUDIT)
            self._fail(subcommand, None, EXIT_AUDIT, f'audit violation: {exc}')

        self._finish(writer, config, subcommand, 'ok', 0)
        if not quiet:
            self.stdout.write(self.style.SUCCESS(summary))

    # --- plumbing ---

    @staticmethod
    def _describe(exc: ConfigError) -> str:
        details = []
        for section, fields in sorted(exc.errors.items()):
            for field, messages in sorted(fields.items()):
                details.append(f"{section}.{field}: {'; '.join(messages)}")
        return f"{exc}: {', '.join(details)}" if details else str(exc)

    def _finish(self, writer, config, subcommand, status, exit_code):
        if writer.artifacts:
            writer.write_manifest()
        record_run(subcommand, status, exit_code, config_sha256=config.sha256,
                   output_dir=writer.out_dir, artifacts=writer.artifacts)

    @staticmethod
    def _fail(subcommand, status, exit_code, message):
        if status is not None:
            record_run(subcommand, status, exit_code)
        raise CommandError(message, returncode=exit_code)

    @staticmethod
    def _check_domain(config):
        spec, limits = config.domain.spec, config.domain.limits
        violations = validate_admissible(spec, limits)
        if violations:
            raise GeometryError('; '.join(v.message for v in violations))
        return spec

    # --- subcommands ---

    def run_solve(self, config, writer):
        spec = self._check_domain(config)
        p = config.physics
        mesh = generate_mesh(spec, config.mesh.n_r, config.mesh.n_theta)
        ops = FemOperators(mesh)
        tol, max_iters = config.solver.tol, config.solver.max_iters
        uN = solve_neumann(mesh, p, ops, tol=tol, max_iters=max_iters)
        uR = solve_robin(mesh, p, ops, tol=tol, max_iters=max_iters)
        cost = energy_gap(mesh, uN, uR, ops)

        states = {}
        for solution in (uN, uR):
            states[solution.kind.value] = {
                'iterations': solution.iterations,
                'relative_residual': solution.residual,
                'gamma_flux': solution.gamma_flux,
                'h1_norm': float(ops.h1_norm(solution.u)),
                'sigma_integral': float(ops.trace_integral(solution.u)),
            }
        report = {
            'command': 'solve',
            'domain': {
                'a': spec.inner_radius,
                'fourier': spec.fourier,
                'R_U': spec.holdall_radius,
                'sigma_length': boundary_measure(spec, Boundary.SIGMA),
            },
            'mesh': {'n_r': mesh.n_r, 'n_theta': mesh.n_theta, 'nodes': mesh.node_count,
                     'triangles': mesh.triangle_count, 'area': mesh.area()},
            'cost': cost.as_dict(),
            'states': states,
        }
        if spec.is_concentric():
            exact = analytic_energy_gap(spec.inner_radius, spec.mean_radius, p)
            report['oracle'] = {
                'analytic_J': exact,
                'relative_error': abs(cost.J - exact) / exact if exact > 0 else abs(cost.J),
            }
        writer.write_json('report.json', report)
        writer.write_csv('neumann.csv', SOLUTION_HEADER, uN.to_rows())
        writer.write_csv('robin.csv', SOLUTION_HEADER, uR.to_rows())
        writer.write_text('mesh.txt', mesh.to_text())
        return f'solve: J = {cost.J:.6e} on a {mesh.n_r}x{mesh.n_theta} mesh'

    def run_optimize(self, config, writer):
        spec = self._check_domain(config)
        p = config.physics
        trajectory = optimize_shape(spec, p, config.optimizer, config.domain.limits)
        report = {
            'command': 'optimize',
            'config': {
                'method': config.optimizer.method,
                'n_r': config.optimizer.n_r,
                'n_theta': config.optimizer.n_theta,
                'max_iters': config.optimizer.max_iters,
            },
            'trajectory': trajectory.as_dict(),
            'reference_radius': bernoulli_radius(spec.inner_radius, p.lam),
        }
        writer.write_json('report.json', report)
        writer.write_csv('trajectory.csv', trajectory.csv_header(), trajectory.to_rows())
        writer.write_svg('boundary_evolution.svg', boundary_figure(trajectory.accepted_specs()))
        writer.write_svg('cost_history.svg', cost_history_figure(trajectory))
        final = trajectory.final
        return (f'optimize: {trajectory.status} after {trajectory.records[-1].iteration} iterations, '
                f'J = {final.J:.6e}, c0 = {final.parameters[0]:.6f}')

    def _constants(self, config, mesh, ops):
        audit = config.audit
        pf = estimate_pf_constant(mesh, ops, samples=audit.samples, seed=audit.seed,
                                  dense_limit=settings.BFB_DENSE_EIGEN_LIMIT)
        c_tr = estimate_trace_constant(mesh, ops, seed=audit.seed, dense_limit=settings.BFB_DENSE_EIGEN_LIMIT)
        return pf, c_tr

    def run_audit(self, config, writer):
        spec = self._check_domain(config)
        mesh = generate_mesh(spec, config.mesh.n_r, config.mesh.n_theta)
        ops = FemOperators(mesh)
        pf, c_tr = self._constants(config, mesh, ops)
        report = audit_consistent_chain(mesh, config.physics, spec.holdall_area, pf=pf, c_tr=c_tr,
                                        s_grid=config.audit.s_grid(), operators=ops, tol=config.solver.tol,
                                        samples=config.audit.samples, seed=config.audit.seed, strict=False)
        writer.write_json('report.json', {'command': 'audit', 'audit': report.as_dict()})
        writer.write_csv('links.csv', ['name', 'lhs', 'rhs', 'slack', 'enforced'],
                         ([l.name, l.lhs, l.rhs, l.slack, int(l.enforced)] for l in report.links))
        if report.violations:
            raise AuditSlackError(f"negative slack on {', '.join(report.violations)}", report=report)
        witness = report.witness
        flaw = f'boxed bound fails at s = {witness.scale:g}' if witness.found else 'no flaw witness'
        return f'audit: chain holds, ||u_R|| = {report.norms["u_R_h1"]:.6g} <= C = {report.bound:.6g}; {flaw}'

    def run_pf(self, config, writer):
        spec = self._check_domain(config)
        mesh = generate_mesh(spec, config.mesh.n_r, config.mesh.n_theta)
        ops = FemOperators(mesh)
        pf, c_tr = self._constants(config, mesh, ops)
        trace = certify_trace_constant(mesh, c_tr, ops, samples=config.audit.samples, seed=config.audit.seed)
        writer.write_json('report.json', {
            'command': 'pf',
            'pf': pf.as_dict(),
            'trace': {'C_tr': c_tr, 'certification': trace},
        })
        return f'pf: C_pf = {pf.C_pf:.6g}, C_tr = {c_tr:.6g}'

    def run_convergence(self, config, writer):
        conv = config.convergence
        study = convergence_study(conv.a, conv.R, config.physics, levels=conv.levels,
                                  radial_divisor=conv.radial_divisor, tol=config.solver.tol)
        writer.write_json('report.json', {'command': 'convergence', 'study': study.as_dict()})
        writer.write_csv('convergence.csv',
                         ['n', 'n_r', 'n_theta', 'h', 'neumann_l2', 'neumann_h1', 'robin_l2', 'robin_h1'],
                         ([r.n, r.n_r, r.n_theta, r.h, r.neumann_l2, r.neumann_h1, r.robin_l2, r.robin_h1]
                          for r in study.rows))
        writer.write_svg('convergence.svg', convergence_figure(study))
        last = study.ratios[-1] if study.ratios else {}
        orders = ', '.join(f'{k} order {math.log2(v):.2f}' for k, v in last.items() if k != 'n')
        return f'convergence: {len(study.rows)} levels; {orders}'

    def run_survey(self, config, writer):
        spec = self._check_domain(config)
        survey, limits = config.survey, config.domain.limits
        if survey.family == 'concentric':
            family = concentric_family(spec.inner_radius, survey.radii, spec.holdall_radius)
        else:
            family = random_family(spec, survey.count, max_harmonic=survey.max_harmonic,
                                   amplitude=survey.amplitude, seed=survey.seed, limits=limits)
        table = uniform_bound_survey(family, config.physics, config.mesh.n_r, config.mesh.n_theta,
                                     limits=limits, samples=config.audit.samples, seed=config.audit.seed,
                                     workers=survey.workers, tol=config.solver.tol)
        writer.write_json('report.json', {
            'command': 'survey',
            'family': [{'index': i, 'fourier': s.fourier} for i, s in enumerate(family)],
            'labels': parameter_labels(family[0]),
            'survey': table.as_dict(),
        })
        writer.write_csv('survey.csv',
                         ['index', 'mean_radius', 'harmonic_norm', 'u_R_h1', 'C', 'slack', 'C_pf', 'C_tr'],
                         ([r.index, r.mean_radius, r.harmonic_norm, r.u_R_h1, r.C, r.slack, r.C_pf, r.C_tr]
                          for r in table.rows))
        if not table.bounded:
            failing = [str(r.index) for r in table.rows if r.violations]
            raise AuditSlackError(f"uniform bound fails (domains {', '.join(failing) or 'none'}; "
                                  f"max norm {table.max_norm:.6g} vs C {table.max_C:.6g})")
        return f'survey: {len(table.rows)} domains, max ||u_R|| = {table.max_norm:.6g} <= {table.max_C:.6g}'
