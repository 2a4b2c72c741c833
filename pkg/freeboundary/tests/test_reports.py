import hashlib
import json
import math
import tempfile
from enum import Enum
from pathlib import Path

import numpy as np
from django.test import TestCase

from freeboundary.geometry import build_domain
from freeboundary.reports import (
    MANIFEST_NAME, ReportWriter, boundary_figure, dumps, to_jsonable,
)


class Side(str, Enum):
    LEFT = 'left'


# TEST JSON CONVERSION
class ToJsonableTest(TestCase):
    # (a) Numpy values and tuples become plain JSON
    def test_numpy_values(self):
        data = to_jsonable({'a': np.float64(1.5), 'b': np.arange(3), 'c': (np.int64(2), np.bool_(True))})
        self.assertEqual(data, {'a': 1.5, 'b': [0, 1, 2], 'c': [2, True]})

    # (b) Non-finite floats become null
    def test_non_finite(self):
        self.assertEqual(json.loads(dumps({'x': math.nan, 'y': -math.inf})), {'x': None, 'y': None})

    # (c) Dataclasses and string enums
    def test_dataclass_and_enum(self):
        spec = build_domain(1.0, [(2.0, 0.0)], 5.0)
        self.assertEqual(to_jsonable(spec)['fourier'], [[2.0, 0.0]])
        self.assertEqual(to_jsonable(Side.LEFT), 'left')

    # (d) Output is stable
    def test_deterministic(self):
        self.assertEqual(dumps({'k': [1.0, 2.0]}), dumps({'k': [1.0, 2.0]}))
        self.assertTrue(dumps({}).endswith('\n'))


# TEST REPORT WRITER
class ReportWriterTest(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name) / 'run'
        self.writer = ReportWriter(self.out)

    def tearDown(self):
        self.tmp.cleanup()

    # (a) Files are written with digests and no temporaries are left
    def test_write_files(self):
        self.writer.write_json('report.json', {'J': 0.5})
        self.writer.write_csv('values.csv', ['i', 'v'], [[0, 0.1], [1, 1.0 / 3.0]])
        self.assertEqual(sorted(p.name for p in self.out.iterdir()), ['report.json', 'values.csv'])
        lines = (self.out / 'values.csv').read_text().splitlines()
        self.assertEqual(lines, ['i,v', '0,0.1', '1,0.3333333333333333'])
        payload = (self.out / 'report.json').read_bytes()
        entry = self.writer.artifacts[0]
        self.assertEqual(entry['sha256'], hashlib.sha256(payload).hexdigest())
        self.assertEqual(entry['size'], len(payload))

    # (b) Rewriting a file replaces its entry
    def test_rewrite(self):
        self.writer.write_text('mesh.txt', 'one\n')
        self.writer.write_text('mesh.txt', 'two\n')
        self.assertEqual(len(self.writer.artifacts), 1)
        self.assertEqual((self.out / 'mesh.txt').read_text(), 'two\n')

    # (c) Manifest lists every other file sorted by name
    def test_manifest(self):
        self.writer.write_text('b.txt', 'b')
        self.writer.write_text('a.txt', 'a')
        self.writer.write_manifest()
        manifest = json.loads((self.out / MANIFEST_NAME).read_text())
        self.assertEqual([f['name'] for f in manifest['files']], ['a.txt', 'b.txt'])
        self.assertIn(MANIFEST_NAME, [a['name'] for a in self.writer.artifacts])

    # (d) SVG output is byte-identical across runs
    def test_svg_deterministic(self):
        spec = build_domain(1.0, [(2.0, 0.0), (0.1, 0.0)], 5.0)
        self.writer.write_svg('one.svg', boundary_figure([spec]))
        self.writer.write_svg('two.svg', boundary_figure([spec]))
        self.assertEqual((self.out / 'one.svg').read_bytes(), (self.out / 'two.svg').read_bytes())
