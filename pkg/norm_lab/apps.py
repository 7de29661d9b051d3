from django.apps import AppConfig


class NormLabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'norm_lab'
    verbose_name = 'Norm experiments'
