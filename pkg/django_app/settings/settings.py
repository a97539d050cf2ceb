"""
Django settings for BG Deconvolution - blind spike-train deconvolution experiments
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

load_dotenv(BASE_DIR / '.env')

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'django-insecure-bgdeconv-dev-key')

DEBUG = os.environ.get('DJANGO_DEBUG', 'false').lower() == 'true'

ALLOWED_HOSTS = ['localhost', '127.0.0.1']

# Application definition
INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    # Third party
    'rest_framework',
    # Local apps
    'django_app.experiments',
]

# Database - only Django internals, experiment artifacts live on disk
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Experiment configuration
BGDECONV = {
    'OUTPUT_ROOT': Path(os.environ.get('BGDECONV_OUTPUT_ROOT', BASE_DIR / 'runs')),
    'DEFAULT_JOBS': int(os.environ.get('BGDECONV_JOBS', os.cpu_count() or 1)),
    'CHOL_REFRESH_INTERVAL': int(os.environ.get('BGDECONV_CHOL_REFRESH_INTERVAL', 1000)),
    'CHOL_DRIFT_TOL': float(os.environ.get('BGDECONV_CHOL_DRIFT_TOL', 1e-6)),
    'DOWNDATE_TOL': float(os.environ.get('BGDECONV_DOWNDATE_TOL', 1e-12)),
    'GIG_MAX_REJECTIONS': int(os.environ.get('BGDECONV_GIG_MAX_REJECTIONS', 10000)),
    'LAMBDA_CLAMP': float(os.environ.get('BGDECONV_LAMBDA_CLAMP', 1e-12)),
    'MPSRF_THRESHOLD': float(os.environ.get('BGDECONV_MPSRF_THRESHOLD', 1.2)),
    'TIMING_SKIP': int(os.environ.get('BGDECONV_TIMING_SKIP', 100)),
}

LOG_LEVEL = os.environ.get('BGDECONV_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} [{process}] {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'bgdeconv': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'django_app': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
