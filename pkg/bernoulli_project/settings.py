"""
Django settings for bernoulli_project project.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env file
load_dotenv(BASE_DIR / '.env')


# The project has no HTTP surface; the key only satisfies Django's startup checks.
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'django-insecure-bfb-local-only')

DEBUG = os.environ.get('DJANGO_DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'freeboundary',  # free boundary solver, audit and CLI
]

MIDDLEWARE = []


# Database
# Only the run ledger (RunRecord / RunArtifact) is stored here.

DATABASE_URL = os.environ.get('DATABASE_URL', '')

if DATABASE_URL:
    import dj_database_url
    DATABASES = {
        'default': dj_database_url.parse(DATABASE_URL)
    }
else:
    # Fallback to SQLite for local runs or if no DATABASE_URL
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


# Numerical defaults for the free boundary solver

BFB_SOLVER_TOL = float(os.environ.get('BFB_SOLVER_TOL', '1e-10'))
BFB_DENSE_EIGEN_LIMIT = int(os.environ.get('BFB_DENSE_EIGEN_LIMIT', '3000'))
BFB_SAMPLE_ANGLES = int(os.environ.get('BFB_SAMPLE_ANGLES', '720'))
BFB_DEFAULT_SEED = int(os.environ.get('BFB_DEFAULT_SEED', '42'))
BFB_OUTPUT_DIR = os.environ.get('BFB_OUTPUT_DIR', 'out')
BFB_LOG_LEVEL = os.environ.get('BFB_LOG_LEVEL', 'INFO')


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'freeboundary': {
            'handlers': ['console'],
            'level': BFB_LOG_LEVEL,
            'propagate': False,
        },
    },
}
