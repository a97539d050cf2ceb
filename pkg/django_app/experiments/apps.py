from django.apps import AppConfig
from django.conf import settings
import logging

logger = logging.getLogger(__name__)


class ExperimentsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'django_app.experiments'

    def ready(self):
        config = getattr(settings, 'BGDECONV', {})
        logger.debug(f"Experiment output root: {config.get('OUTPUT_ROOT')}, "
                     f"default jobs: {config.get('DEFAULT_JOBS')}")
