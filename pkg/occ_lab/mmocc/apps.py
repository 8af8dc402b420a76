from django.apps import AppConfig


class MmoccConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'mmocc'
    verbose_name = 'Multimodal one-class classification'
