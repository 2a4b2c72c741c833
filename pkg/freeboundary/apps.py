from django.apps import AppConfig


class FreeboundaryConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'freeboundary'
    verbose_name = 'Bernoulli free boundary'
