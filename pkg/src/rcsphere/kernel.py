"""Backend selection for the coverage kernel.

The compiled extension ``rcsphere._kernel`` is used when it imports; otherwise
the pure-Python twin ``rcsphere._kernel_py`` takes over.  Set
``RCSPHERE_KERNEL=python`` (or ``compiled``) to force a backend.
"""

from __future__ import annotations

import importlib
import os

_choice = os.environ.get("RCSPHERE_KERNEL", "auto").lower()


def load(name: str):
    """Import a backend by name: ``"compiled"`` or ``"python"``."""
    if name == "compiled":
        return importlib.import_module("rcsphere._kernel")
    if name == "python":
        return importlib.import_module("rcsphere._kernel_py")
    raise ValueError(f"unknown kernel backend {name!r}")


if _choice == "python":
    _impl = load("python")
    BACKEND = "python"
elif _choice == "compiled":
    _impl = load("compiled")
    BACKEND = "compiled"
else:
    try:
        _impl = load("compiled")
        BACKEND = "compiled"
    except ImportError:
        _impl = load("python")
        BACKEND = "python"

component = _impl.component
components = _impl.components
find_intervals = _impl.find_intervals
v_value = _impl.v_value
h_value = _impl.h_value
function_values = _impl.function_values
