"""
Pytest bootstrap: configure Django before any test module imports it
"""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'django_app.settings.settings')
django.setup()
