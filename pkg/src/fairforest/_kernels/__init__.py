"""Kernel backend selection.

The compiled Cython backend is used when its extension module built;
otherwise the pure-Python reference backend takes over. Set
``FAIRFOREST_BACKEND=pure`` (or ``compiled``) to force a choice.
Both backends are bit-compatible, so the selection never changes results.
"""

import os


def load_backend(name):
    """Import a backend module by name ('pure' or 'compiled')."""
    if name == "pure":
        from . import pure

        return pure
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


_requested = os.environ.get("FAIRFOREST_BACKEND", "").strip().lower()
if _requested:
    backend = load_backend(_requested)
else:
    try:
        from . import _core as backend
    except ImportError:
        from . import pure as backend

NAME = backend.NAME
SPLIT = backend.SPLIT
LEAF = backend.LEAF
CRIT_PLAIN = backend.CRIT_PLAIN
CRIT_SUB = backend.CRIT_SUB
CRIT_DIV = backend.CRIT_DIV
CRIT_ADD = backend.CRIT_ADD

entropy2 = backend.entropy2
info_gain_counts = backend.info_gain_counts
combine_gains = backend.combine_gains
scan_split = backend.scan_split
route_batch = backend.route_batch
