"""Pick the curve backend at import time.

``PPLOYALTY_BACKEND`` may be ``auto`` (default: compiled if importable),
``native`` (compiled or fail) or ``python``.
"""

import logging
import os

ENV_VAR = "PPLOYALTY_BACKEND"

log = logging.getLogger(__name__)


def load(name):
    if name == "native":
        from . import _native
        return _native
    if name == "python":
        from . import _purepy
        return _purepy
    raise ValueError(f"unknown backend {name!r}")


def available():
    names = []
    for name in ("native", "python"):
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select():
    choice = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if choice != "auto":
        return load(choice), choice
    try:
        return load("native"), "native"
    except ImportError:
        log.warning("compiled backend unavailable, falling back to pure Python")
        return load("python"), "python"


impl, NAME = _select()
