"""
Django settings for the residual fault pipeline.

Only the management commands are used; there is no web surface and no
database. Pipeline defaults come from RESIDUALS_* environment variables.
"""
import os
from pathlib import Path

try:
    from dotenv import load_dotenv
    BASE_DIR = Path(__file__).resolve().parent.parent
    load_dotenv(BASE_DIR / ".env")
except ImportError:
    # python-dotenv not installed; variables can still come from the shell
    BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "dev-secret-not-used-for-serving")

DEBUG = os.environ.get("DEBUG", "0") == "1"

ALLOWED_HOSTS: list[str] = []

INSTALLED_APPS = [
    "workflow",
]

DATABASES = {}

LANGUAGE_CODE = "en-gb"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Pipeline defaults (a config file and CLI flags override these)
RESIDUALS_SEED = int(os.environ.get("RESIDUALS_SEED", "42"))
RESIDUALS_OUT_DIR = os.environ.get("RESIDUALS_OUT_DIR", "out")
RESIDUALS_KEYWORDS = [
    k.strip() for k in os.environ.get("RESIDUALS_KEYWORDS", "").split(",") if k.strip()
]
RESIDUALS_ISSUE_CACHE = os.environ.get("RESIDUALS_ISSUE_CACHE", str(BASE_DIR / ".issue_cache.json"))
GITHUB_TOKEN = os.environ.get("GITHUB_TOKEN") or None
RESIDUALS_LOG_LEVEL = os.environ.get("RESIDUALS_LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "residual_faults": {"handlers": ["console"], "level": RESIDUALS_LOG_LEVEL, "propagate": False},
        "workflow": {"handlers": ["console"], "level": RESIDUALS_LOG_LEVEL, "propagate": False},
    },
}
