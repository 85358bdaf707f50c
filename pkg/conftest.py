import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'wave_lab.settings')
django.setup()
