import math

from django.test import TestCase

from freeboundary.cost import evaluate_cost
from freeboundary.exceptions import ConfigError, GeometryError
from freeboundary.geometry import AdmissibilityLimits, build_domain, validate_admissible
from freeboundary.optimizer import (
    CONVERGED_COST, NELDER_MEAD, NELDER_MEAD_MAX_PARAMETERS, STALLED, OptimConfig, optimize_shape,
)
from freeboundary.states import PhysicsParams

BERNOULLI = PhysicsParams(1.0 / math.e, 1.0)
COARSE = dict(n_r=8, n_theta=32)
FINE = dict(n_r=16, n_theta=64)


def bernoulli_floor():
    """Discrete J of the exact Bernoulli circle on the default 16 x 64 mesh."""
    return evaluate_cost(build_domain(1.0, [(math.e, 0.0)], 5.0), BERNOULLI, tol=1e-12, **FINE).J


# TEST OPTIMIZER CONFIGURATION
class OptimConfigTest(TestCase):
    # (a) Defaults describe backtracking gradient descent
    def test_defaults(self):
        cfg = OptimConfig()
        self.assertEqual(cfg.method, 'fd-gradient-descent')
        self.assertEqual((cfg.shrink, cfg.armijo, cfg.min_step), (0.5, 1e-4, 1e-8))
        self.assertEqual((cfg.j_tol, cfg.grad_tol, cfg.max_iters), (1e-10, 1e-5, 60))
        self.assertEqual((cfg.n_r, cfg.n_theta), (16, 64))

    # (b) Invalid values are rejected
    def test_invalid_config(self):
        with self.assertRaises(ValueError):
            OptimConfig(method='newton')
        with self.assertRaises(ValueError):
            OptimConfig(j_tol=0.0)
        with self.assertRaises(ValueError):
            OptimConfig(shrink=1.0)
        with self.assertRaises(ValueError):
            OptimConfig(max_iters=0)


# TEST SHAPE OPTIMIZATION
class GradientDescentTest(TestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.floor = bernoulli_floor()

    # (a) Starting at the optimum with the default tolerance stops on the cost within three steps
    def test_start_at_optimum(self):
        spec = build_domain(1.0, [(math.e, 0.0)], 5.0)
        trajectory = optimize_shape(spec, BERNOULLI, OptimConfig())
        self.assertEqual(trajectory.status, CONVERGED_COST)
        self.assertLessEqual(trajectory.records[-1].iteration, 3)
        self.assertLessEqual(trajectory.final.J, 1e-10)

    # (b) A looser cost tolerance stops within two steps
    def test_start_at_optimum_loose_tolerance(self):
        spec = build_domain(1.0, [(math.e, 0.0)], 5.0)
        trajectory = optimize_shape(spec, BERNOULLI, OptimConfig(j_tol=1e-7))
        self.assertEqual(trajectory.status, CONVERGED_COST)
        self.assertLessEqual(trajectory.records[-1].iteration, 2)
        self.assertLessEqual(trajectory.final.J, 1e-7)

    # (c) Recovers the Bernoulli radius from an enlarged circle with monotone descent
    def test_recovers_radius(self):
        spec = build_domain(1.0, [(1.2 * math.e, 0.0)], 5.0)
        trajectory = optimize_shape(spec, BERNOULLI, OptimConfig(max_iters=20, **FINE))
        c0 = trajectory.final.parameters[0]
        self.assertLessEqual(abs(c0 - math.e) / math.e, 0.02)
        self.assertLessEqual(trajectory.final.J, 10.0 * self.floor)
        accepted = [r.J for r in trajectory.records if r.accepted]
        self.assertTrue(all(b <= a for a, b in zip(accepted, accepted[1:])))
        self.assertLess(trajectory.final.J, trajectory.records[0].J)

    # (d) Harmonic perturbation decays and every accepted iterate is admissible
    def test_perturbation_decays(self):
        spec = build_domain(1.0, [(math.e, 0.0), (0.0, 0.0), (0.15, 0.0)], 5.0)
        limits = AdmissibilityLimits()
        trajectory = optimize_shape(spec, BERNOULLI, OptimConfig(**FINE), limits)
        final = trajectory.final.parameters
        self.assertLessEqual(abs(final[0] - math.e) / math.e, 0.02)
        self.assertTrue(all(abs(v) <= 0.02 for v in final[1:]))
        self.assertLessEqual(trajectory.final.J, 10.0 * self.floor)
        for accepted in trajectory.accepted_specs():
            self.assertEqual(validate_admissible(accepted, limits), [])

    # (e) No admissible step above the minimum stalls
    def test_stalled(self):
        spec = build_domain(1.0, [(2.0, 0.0)], 5.0)
        trajectory = optimize_shape(spec, BERNOULLI, OptimConfig(initial_step=0.25, min_step=0.5, **COARSE))
        self.assertEqual(trajectory.status, STALLED)
        self.assertEqual(len(trajectory.records), 1)

    # (f) Inadmissible start is refused
    def test_inadmissible_start(self):
        with self.assertRaises(GeometryError):
            optimize_shape(build_domain(1.0, [(1.05, 0.0)], 5.0), BERNOULLI, OptimConfig(**COARSE))

    # (g) Trajectory rows and summary
    def test_trajectory_output(self):
        spec = build_domain(1.0, [(2.5, 0.0)], 5.0)
        trajectory = optimize_shape(spec, BERNOULLI, OptimConfig(max_iters=2, **COARSE))
        self.assertEqual(trajectory.csv_header(), ['iteration', 'c0', 'J', 'measure', 'step', 'accepted'])
        rows = list(trajectory.to_rows())
        self.assertEqual(len(rows), len(trajectory.records))
        summary = trajectory.as_dict()
        self.assertEqual(summary['method'], 'fd-gradient-descent')
        self.assertIn('c0', summary['final_parameters'])


class NelderMeadTest(TestCase):
    # (a) Derivative-free search finds the radius too
    def test_recovers_radius(self):
        spec = build_domain(1.0, [(1.2 * math.e, 0.0)], 5.0)
        trajectory = optimize_shape(spec, BERNOULLI, OptimConfig(method=NELDER_MEAD, max_iters=40, **FINE))
        self.assertEqual(trajectory.method, NELDER_MEAD)
        self.assertLessEqual(abs(trajectory.final.parameters[0] - math.e) / math.e, 0.02)
        self.assertLessEqual(trajectory.final.J, 10.0 * bernoulli_floor())
        self.assertLess(trajectory.final.J, trajectory.records[0].J)

    # (b) More shape parameters than the simplex search handles are refused
    def test_parameter_limit(self):
        spec = build_domain(1.0, [(2.5, 0.0), (0.0, 0.0), (0.0, 0.0), (0.05, 0.0)], 5.0)
        self.assertGreater(spec.parameter_vector().size, NELDER_MEAD_MAX_PARAMETERS)
        with self.assertRaises(ConfigError) as ctx:
            optimize_shape(spec, BERNOULLI, OptimConfig(method=NELDER_MEAD, **COARSE))
        self.assertIn('optimizer', ctx.exception.errors)
