"""Kernel backend selection.

Two interchangeable implementations of the replication kernels exist:
a compiled Cython extension (``compiled``) and a pure-Python mirror
(``python``).  They are bit-identical in output; the compiled one is
just fast.  Selection order:

1. an explicit ``backend=`` argument at the call site,
2. the ``SIMCAL_KERNELS`` environment variable (``compiled``/``python``),
3. the compiled extension when importable, else the pure-Python mirror.
"""

from __future__ import annotations

import os

from ..errors import ConfigurationError
from . import _reference

try:  # pragma: no cover - depends on build environment
    from . import _ckernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

_BACKENDS = {"python": _reference}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def default_backend_name() -> str:
    env = os.environ.get("SIMCAL_KERNELS")
    if env:
        if env not in ("compiled", "python"):
            raise ConfigurationError(
                f"SIMCAL_KERNELS must be 'compiled' or 'python', got {env!r}"
            )
        return env
    return "compiled" if _compiled is not None else "python"


def get_backend(name: str | None = None):
    """Resolve a kernel backend module by name (or by the default rules)."""
    resolved = name or default_backend_name()
    try:
        return _BACKENDS[resolved]
    except KeyError:
        raise ConfigurationError(
            f"kernel backend {resolved!r} is not available; "
            f"available: {', '.join(available_backends())}"
        ) from None
