from django.apps import AppConfig


class FloquetConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'floquet'
