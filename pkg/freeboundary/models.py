import logging

from django.db import DatabaseError, models, transaction

logger = logging.getLogger(__name__)


class RunRecord(models.Model):
    """Model to store one invocation of the bfb command"""
    STATUS_CHOICES = [
        ('ok', 'OK'),
        ('config_error', 'Configuration error'),
        ('solver_error', 'Solver error'),
        ('audit_violation', 'Audit violation'),
    ]

    command = models.CharField(max_length=32)
    config_sha256 = models.CharField(max_length=64, blank=True, default='')
    output_dir = models.CharField(max_length=500, blank=True, default='')
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='ok')
    exit_code = models.PositiveSmallIntegerField(default=0)
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return f"bfb {self.command} - {self.status}"


class RunArtifact(models.Model):
    """Model to store a file emitted by a run and its digest"""
    KIND_CHOICES = [('json', 'JSON'), ('csv', 'CSV'), ('svg', 'SVG'), ('txt', 'Text')]

    run = models.ForeignKey(RunRecord, on_delete=models.CASCADE, related_name='artifacts')
    name = models.CharField(max_length=200)
    kind = models.CharField(max_length=8, choices=KIND_CHOICES)
    sha256 = models.CharField(max_length=64)
    size = models.PositiveIntegerField()

    def __str__(self):
        return f"{self.name} ({self.size} bytes)"


def record_run(command, status, exit_code, config_sha256='', output_dir='', artifacts=()):
    """Store the run and its artifacts; returns None when the ledger database is unavailable."""
    try:
        with transaction.atomic():
            run = RunRecord.objects.create(command=command, config_sha256=config_sha256,
                                           output_dir=str(output_dir), status=status, exit_code=exit_code)
            RunArtifact.objects.bulk_create([
                RunArtifact(run=run, name=a['name'], kind=a['kind'], sha256=a['sha256'], size=a['size'])
                for a in artifacts
            ])
    except DatabaseError as exc:
        logger.warning("Run ledger unavailable, %s not recorded: %s", command, exc)
        return None
    return run
