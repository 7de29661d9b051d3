from django.apps import AppConfig


class LatticeShellsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'lattice_shells'
    verbose_name = 'Lattice shells'
