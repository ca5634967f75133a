"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. ``use_backend`` switches explicitly (tests and the
benchmark run both).
"""
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = _ckernels if _ckernels is not None else _pykernels


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Select the kernel backend by name ("cython" or "python")."""
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; "
                         f"choose from {available_backends()}") from None


def current_backend():
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def pava_decreasing(y, w):
    return _active.pava_decreasing(y, w)


def segment_moments(phi_left, phi_right, length):
    return _active.segment_moments(phi_left, phi_right, length)
