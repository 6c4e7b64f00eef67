import json
import os
from typing import Any, Dict

import django
from django.conf import settings

ENV_PREFIX = "QUANTIZED_CONSENSUS_"


def environment_settings() -> Dict[str, Any]:
    """Collect ``QUANTIZED_CONSENSUS_*`` environment variables as settings.

    Values are JSON-decoded when possible so numbers and booleans keep
    their type; anything else is kept as a plain string.

    Returns:
        Dict[str, Any]: Setting names mapped to their decoded values.

    """
    values: Dict[str, Any] = {}
    for name, raw in os.environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        try:
            values[name] = json.loads(raw)
        except json.JSONDecodeError:
            values[name] = raw
    return values


def configure_django_settings() -> None:
    """Configure Django for standalone (library or CLI) use.

    Does nothing when a host project already configured settings, so the
    package can also be installed into an existing Django project and read
    its ``QUANTIZED_CONSENSUS_*`` settings from there.

    """
    if not settings.configured:
        settings.configure(
            INSTALLED_APPS=["quantized_consensus"],
            LANGUAGE_CODE="en-us",
            TIME_ZONE="UTC",
            USE_I18N=False,
            USE_TZ=True,
            **environment_settings(),
        )
        django.setup()
