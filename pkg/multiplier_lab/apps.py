from django.apps import AppConfig


class MultiplierLabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'multiplier_lab'
    verbose_name = 'Major-arc multipliers'
