from unittest import mock

from django.db import DatabaseError
from django.test import TestCase

from freeboundary.models import RunArtifact, RunRecord, record_run


# TEST RUN LEDGER FIELDS
class RunRecordModelTest(TestCase):
    # (a) Run fields stored successfully
    def test_run_record_creation(self):
        run = RunRecord.objects.create(command='solve', config_sha256='ab' * 32, output_dir='out')
        self.assertEqual(run.command, 'solve')
        self.assertEqual(run.status, 'ok')
        self.assertEqual(run.exit_code, 0)
        self.assertIsNotNone(run.created_at)

    # (b) String representation
    def test_run_record_string_representation(self):
        run = RunRecord.objects.create(command='audit', status='audit_violation', exit_code=4)
        self.assertEqual(str(run), "bfb audit - audit_violation")

    # (c) Blank digest and directory are allowed
    def test_run_record_with_blank_fields(self):
        run = RunRecord.objects.create(command='pf', status='config_error', exit_code=2)
        self.assertEqual(run.config_sha256, '')
        self.assertEqual(run.output_dir, '')


class RunArtifactModelTest(TestCase):
    def setUp(self):
        self.run = RunRecord.objects.create(command='solve')

    # (a) Artifacts attach to their run
    def test_artifact_creation(self):
        artifact = RunArtifact.objects.create(run=self.run, name='report.json', kind='json',
                                              sha256='0' * 64, size=120)
        self.assertEqual(self.run.artifacts.count(), 1)
        self.assertEqual(str(artifact), "report.json (120 bytes)")

    # (b) Deleting the run removes its artifacts
    def test_cascade_delete(self):
        RunArtifact.objects.create(run=self.run, name='mesh.txt', kind='txt', sha256='1' * 64, size=10)
        self.run.delete()
        self.assertEqual(RunArtifact.objects.count(), 0)


# TEST RECORDING RUNS
class RecordRunTest(TestCase):
    # (a) Run and artifacts are stored together
    def test_record_run(self):
        artifacts = [
            {'name': 'report.json', 'kind': 'json', 'sha256': 'a' * 64, 'size': 10},
            {'name': 'robin.csv', 'kind': 'csv', 'sha256': 'b' * 64, 'size': 20},
        ]
        run = record_run('solve', 'ok', 0, config_sha256='c' * 64, output_dir='out', artifacts=artifacts)
        self.assertEqual(RunRecord.objects.count(), 1)
        self.assertEqual(sorted(run.artifacts.values_list('name', flat=True)), ['report.json', 'robin.csv'])

    # (b) Database failures are logged and swallowed
    def test_database_unavailable(self):
        with mock.patch.object(RunRecord.objects, 'create', side_effect=DatabaseError('no table')):
            with self.assertLogs('freeboundary.models', level='WARNING'):
                self.assertIsNone(record_run('solve', 'ok', 0))
