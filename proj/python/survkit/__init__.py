"""Survival-prediction toolkit: python surface over the C++ core."""

try:
    from ._survkit import *  # noqa: F401,F403  (installed package layout)
    from . import _survkit as _impl
except ImportError:  # in-tree test layout: extension on sys.path directly
    from _survkit import *  # noqa: F401,F403
    import _survkit as _impl

__doc__ = _impl.__doc__
