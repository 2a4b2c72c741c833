import math

import numpy as np
from django.test import TestCase

from freeboundary.convergence import QUAD_WEIGHTS, convergence_study, field_errors
from freeboundary.geometry import build_domain, generate_mesh
from freeboundary.states import PhysicsParams, RadialSolution

BERNOULLI = PhysicsParams(1.0 / math.e, 1.0)


# TEST ERROR NORMS
class FieldErrorsTest(TestCase):
    def setUp(self):
        self.mesh = generate_mesh(build_domain(1.0, [(2.0, 0.0)], 5.0), 4, 32)

    # (a) Quadrature weights sum to one
    def test_quadrature_weights(self):
        self.assertAlmostEqual(float(QUAD_WEIGHTS.sum()), 1.0, places=12)

    # (b) The constant solution is reproduced exactly
    def test_constant_is_exact(self):
        l2, h1 = field_errors(self.mesh, np.ones(self.mesh.node_count), RadialSolution(0.0, 1.0, 2.0))
        self.assertLess(l2, 1e-12)
        self.assertLess(h1, 1e-12)

    # (c) A constant field against a logarithm measures the full gradient
    def test_error_of_constant_against_log(self):
        exact = RadialSolution(-1.0, 1.0, 2.0)
        _, h1 = field_errors(self.mesh, np.ones(self.mesh.node_count), exact)
        self.assertLess(abs(h1 ** 2 - exact.dirichlet_energy()) / exact.dirichlet_energy(), 0.02)


# TEST CONVERGENCE STUDY
class ConvergenceStudyTest(TestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.study = convergence_study(1.0, 2.0, BERNOULLI, levels=(16, 32, 64, 128))

    # (a) One row per level with the mesh sizes
    def test_rows(self):
        self.assertEqual([row.n for row in self.study.rows], [16, 32, 64, 128])
        self.assertEqual([row.n_r for row in self.study.rows], [8, 16, 32, 64])
        self.assertAlmostEqual(self.study.rows[0].h, 2.0 * math.pi * 2.0 / 16)
        self.assertEqual(len(self.study.ratios), 3)

    # (b) Errors shrink under refinement
    def test_errors_decrease(self):
        for key in ('neumann_l2', 'neumann_h1', 'robin_l2', 'robin_h1'):
            values = [getattr(row, key) for row in self.study.rows]
            self.assertTrue(all(a > b for a, b in zip(values, values[1:])), key)

    # (c) Second order in L2 and first order in H1
    def test_rates(self):
        for ratio in self.study.ratios[1:]:
            for key in ('neumann_l2', 'robin_l2'):
                self.assertTrue(3.5 <= ratio[key] <= 4.5, (key, ratio[key]))
            for key in ('neumann_h1', 'robin_h1'):
                self.assertTrue(1.8 <= ratio[key] <= 2.2, (key, ratio[key]))

    # (d) Study serializes to plain data
    def test_as_dict(self):
        data = self.study.as_dict()
        self.assertEqual(data['a'], 1.0)
        self.assertEqual(len(data['rows']), 4)
        self.assertIn('robin_h1', data['ratios'][0])
