from django.apps import AppConfig


class ArithSumsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'arith_sums'
    verbose_name = 'Arithmetic exponential sums'
