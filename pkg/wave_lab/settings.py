"""
Django settings for the wave_lab project.

The project has no HTTP surface: it is driven through management commands
(`python manage.py run|list|describe|selftest`). Settings hold the numerical
defaults shared by every app.

For more information on this file, see
https://docs.djangoproject.com/en/4.2/topics/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment from .env at project root if present
load_dotenv(BASE_DIR / '.env')

SECRET_KEY = os.getenv('SECRET_KEY', 'dev-secret')
DEBUG = os.getenv('DEBUG', 'True') == 'True'
ALLOWED_HOSTS = []


# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    # third party
    'rest_framework',
]

# Local apps
INSTALLED_APPS += [
    'coefficients',
    'modes',
    'floquet',
    'spectral',
    'rates',
    'asymptotics',
    'scenarios',
]

# Database is only required by Django's machinery; the lab itself stores nothing.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('DB_NAME', str(BASE_DIR / 'db.sqlite3')),
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Numerical defaults of the lab
WAVE_LAB = {
    'DEFAULT_TOL': float(os.getenv('WAVE_LAB_DEFAULT_TOL', '1e-10')),
    'SCAN_TOL': float(os.getenv('WAVE_LAB_SCAN_TOL', '1e-11')),
    'QUAD_TOL': float(os.getenv('WAVE_LAB_QUAD_TOL', '1e-10')),
    'MAX_STEP_FACTOR': float(os.getenv('WAVE_LAB_MAX_STEP_FACTOR', '0.1')),
    'MAX_STEPS': int(os.getenv('WAVE_LAB_MAX_STEPS', '20000000')),
    'MAX_REJECTS': int(os.getenv('WAVE_LAB_MAX_REJECTS', '60')),
    'WORKERS': int(os.getenv('WAVE_LAB_WORKERS', '4')),
    'CHUNK_SIZE': int(os.getenv('WAVE_LAB_CHUNK_SIZE', '64')),
    'SCENARIO_DIR': BASE_DIR / 'scenarios' / 'catalog',
    'OUTPUT_DIR': Path(os.getenv('WAVE_LAB_OUTPUT_DIR', str(BASE_DIR / 'runs'))),
    'REPORT_SCHEMA_VERSION': '1.0',
}


# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': os.getenv('WAVE_LAB_LOG_LEVEL', 'INFO'),
            'propagate': False,
        }
        for app in ('wave_lab', 'coefficients', 'modes', 'floquet', 'spectral',
                    'rates', 'asymptotics', 'scenarios')
    },
}


# Sentry (optional)
SENTRY_DSN = os.getenv('SENTRY_DSN', '')
if SENTRY_DSN:
    import sentry_sdk

    sentry_sdk.init(dsn=SENTRY_DSN, traces_sample_rate=float(os.getenv('SENTRY_TRACES_SAMPLE_RATE', '0.0')))
