import json
import math
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from freeboundary.cost import analytic_energy_gap
from freeboundary.models import RunRecord
from freeboundary.states import PhysicsParams

BERNOULLI = {'lambda': 1.0 / math.e, 'beta': 1.0}


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, **sections):
        data = {
            'domain': {'a': 1.0, 'fourier': [[2.0, 0.0]], 'R_U': 5.0},
            'physics': dict(BERNOULLI),
            'mesh': {'n_r': 4, 'n_theta': 32},
            'audit': {'samples': 30},
        }
        data.update(sections)
        path = self.root / 'run.json'
        path.write_text(json.dumps(data))
        return path

    def bfb(self, subcommand, config, out, quiet=True):
        stdout = StringIO()
        args = [subcommand, '--config', str(config), '--out', str(out)]
        if quiet:
            args.append('--quiet')
        call_command('bfb', *args, stdout=stdout)
        return stdout.getvalue()

    def manifest_names(self, out):
        return [f['name'] for f in json.loads((out / 'manifest.json').read_text())['files']]


# TEST SOLVE
class SolveCommandTest(CommandTestCase):
    # (a) Energy gap matches the closed form and every artifact is listed
    def test_solve(self):
        config = self.write_config(mesh={'n_r': 16, 'n_theta': 64})
        out = self.root / 'solve'
        self.bfb('solve', config, out)
        report = json.loads((out / 'report.json').read_text())
        exact = analytic_energy_gap(1.0, 2.0, PhysicsParams(1.0 / math.e, 1.0))
        self.assertLess(abs(report['cost']['J'] - exact) / exact, 0.05)
        self.assertAlmostEqual(report['oracle']['analytic_J'], exact)
        self.assertEqual(self.manifest_names(out), ['mesh.txt', 'neumann.csv', 'report.json', 'robin.csv'])
        header = (out / 'robin.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'node_index,x,y,u')

    # (b) Reruns are byte-identical
    def test_deterministic(self):
        config = self.write_config()
        first, second = self.root / 'one', self.root / 'two'
        self.bfb('solve', config, first)
        self.bfb('solve', config, second)
        for name in ('report.json', 'neumann.csv', 'robin.csv', 'mesh.txt', 'manifest.json'):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

    # (c) Summary is printed unless quiet
    def test_summary(self):
        config = self.write_config()
        self.assertIn('solve: J =', self.bfb('solve', config, self.root / 'loud', quiet=False))
        self.assertEqual(self.bfb('solve', config, self.root / 'quiet'), '')

    # (d) Runs are written to the ledger
    def test_ledger(self):
        self.bfb('solve', self.write_config(), self.root / 'ledger')
        run = RunRecord.objects.get()
        self.assertEqual((run.command, run.status, run.exit_code), ('solve', 'ok', 0))
        self.assertEqual(run.artifacts.count(), 5)
        self.assertEqual(len(run.config_sha256), 64)


# TEST EXIT CODES
class ExitCodeTest(CommandTestCase):
    # (a) Invalid configuration exits with 2 and writes nothing
    def test_config_error(self):
        config = self.write_config(physics={'lambda': 0.5, 'beta': -1.0})
        out = self.root / 'bad'
        with self.assertRaises(CommandError) as ctx:
            self.bfb('solve', config, out)
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('physics.beta', str(ctx.exception))
        self.assertFalse(out.exists())
        self.assertEqual(RunRecord.objects.get().status, 'config_error')

    # (b) Inadmissible domain exits with 2
    def test_inadmissible_domain(self):
        config = self.write_config(domain={'a': 1.0, 'fourier': [[1.05, 0.0]], 'R_U': 5.0})
        with self.assertRaises(CommandError) as ctx:
            self.bfb('solve', config, self.root / 'thin')
        self.assertEqual(ctx.exception.returncode, 2)

    # (c) Iteration cap exits with 3
    def test_solver_error(self):
        config = self.write_config(solver={'max_iters': 1})
        with self.assertRaises(CommandError) as ctx:
            self.bfb('solve', config, self.root / 'capped')
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertEqual(RunRecord.objects.get().status, 'solver_error')

    # (d) Negative slack exits with 4
    def test_audit_violation(self):
        report = mock.MagicMock(violations=['trace'], links=[])
        report.as_dict.return_value = {'violations': ['trace']}
        with mock.patch('freeboundary.management.commands.bfb.audit_consistent_chain', return_value=report):
            with self.assertRaises(CommandError) as ctx:
                self.bfb('audit', self.write_config(), self.root / 'slack')
        self.assertEqual(ctx.exception.returncode, 4)
        self.assertTrue((self.root / 'slack' / 'links.csv').exists())

    # (e) Missing configuration file exits with 2
    def test_missing_config(self):
        with self.assertRaises(CommandError) as ctx:
            self.bfb('pf', self.root / 'absent.json', self.root / 'none')
        self.assertEqual(ctx.exception.returncode, 2)


# TEST OTHER SUBCOMMANDS
class SubcommandTest(CommandTestCase):
    # (a) Corrected chain audit passes and reports the flaw witness
    def test_audit(self):
        out = self.root / 'audit'
        self.bfb('audit', self.write_config(), out)
        report = json.loads((out / 'report.json').read_text())
        self.assertEqual(report['audit']['violations'], [])
        self.assertTrue(report['audit']['witness']['found'])
        self.assertIn('links.csv', self.manifest_names(out))

    # (b) Constant estimates
    def test_pf(self):
        out = self.root / 'pf'
        self.bfb('pf', self.write_config(), out)
        report = json.loads((out / 'report.json').read_text())
        self.assertGreater(report['pf']['C_pf'], 0.0)
        self.assertTrue(report['trace']['certification']['certified'])

    # (c) Convergence study on two levels
    def test_convergence(self):
        out = self.root / 'convergence'
        self.bfb('convergence', self.write_config(convergence={'levels': [8, 16]}), out)
        self.assertEqual(len((out / 'convergence.csv').read_text().splitlines()), 3)
        self.assertTrue((out / 'convergence.svg').exists())

    # (d) Short Nelder-Mead run
    def test_optimize(self):
        out = self.root / 'optimize'
        config = self.write_config(optimizer={'method': 'nelder-mead', 'max_iters': 5, 'n_r': 4, 'n_theta': 16})
        self.bfb('optimize', config, out)
        report = json.loads((out / 'report.json').read_text())
        self.assertEqual(report['trajectory']['method'], 'nelder-mead')
        self.assertAlmostEqual(report['reference_radius'], math.e, places=6)
        self.assertEqual(sorted(self.manifest_names(out)),
                         ['boundary_evolution.svg', 'cost_history.svg', 'report.json', 'trajectory.csv'])

    # (e) Concentric survey stays bounded
    def test_survey(self):
        out = self.root / 'survey'
        config = self.write_config(mesh={'n_r': 2, 'n_theta': 16},
                                   survey={'family': 'concentric', 'radii': [1.5, 2.0, 2.5]})
        self.bfb('survey', config, out)
        self.assertEqual(len((out / 'survey.csv').read_text().splitlines()), 4)
        report = json.loads((out / 'report.json').read_text())
        self.assertTrue(report['survey']['bounded'])

    # (f) Audit, optimize and survey reruns are byte-identical
    def test_deterministic_subcommands(self):
        runs = {
            'audit': ({}, ('report.json', 'links.csv')),
            'optimize': ({'optimizer': {'max_iters': 3, 'n_r': 4, 'n_theta': 16}}, ('report.json', 'trajectory.csv')),
            'survey': ({'mesh': {'n_r': 2, 'n_theta': 16},
                        'survey': {'family': 'random', 'count': 3, 'seed': 42, 'workers': 2}},
                       ('report.json', 'survey.csv')),
        }
        for subcommand, (sections, names) in runs.items():
            config = self.write_config(**sections)
            first, second = self.root / f'{subcommand}-one', self.root / f'{subcommand}-two'
            self.bfb(subcommand, config, first)
            self.bfb(subcommand, config, second)
            for name in names + ('manifest.json',):
                self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), (subcommand, name))
