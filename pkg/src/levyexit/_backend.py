"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``LEVYEXIT_BACKEND=python`` is set) the numpy kernels
are used.  Both expose ``simulate_paths``, ``sample_increments`` and
``uniform_pairs`` with identical signatures.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels


def _default():
    wanted = os.environ.get("LEVYEXIT_BACKEND", "").strip().lower()
    if wanted:
        if wanted not in BACKENDS:
            raise ImportError(f"LEVYEXIT_BACKEND={wanted!r} is not available "
                              f"(have {sorted(BACKENDS)})")
        return wanted
    return "compiled" if "compiled" in BACKENDS else "python"


DEFAULT = _default()


def get(name=None):
    """Kernel module by name; ``None`` gives the import-time default."""
    return BACKENDS[name or DEFAULT]


def default_threads():
    return os.cpu_count() or 1
