# Generated by Django 5.2.8 on 2026-10-18 10:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=32)),
                ('config_sha256', models.CharField(blank=True, default='', max_length=64)),
                ('output_dir', models.CharField(blank=True, default='', max_length=500)),
                ('status', models.CharField(choices=[('ok', 'OK'), ('config_error', 'Configuration error'), ('solver_error', 'Solver error'), ('audit_violation', 'Audit violation')], default='ok', max_length=20)),
                ('exit_code', models.PositiveSmallIntegerField(default=0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
        ),
        migrations.CreateModel(
            name='RunArtifact',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=200)),
                ('kind', models.CharField(choices=[('json', 'JSON'), ('csv', 'CSV'), ('svg', 'SVG'), ('txt', 'Text')], max_length=8)),
                ('sha256', models.CharField(max_length=64)),
                ('size', models.PositiveIntegerField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='artifacts', to='freeboundary.runrecord')),
            ],
        ),
    ]
