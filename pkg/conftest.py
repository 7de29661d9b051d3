import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'spherelab.settings')
django.setup()
