"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python twin is
always available and produces bit-for-bit identical results.  Set
COINFACTORY_FORCE_PURE=1 to ignore the extension (used by the benchmark and
the equivalence tests).
"""

import os

from . import pure

compiled = None
if not os.environ.get("COINFACTORY_FORCE_PURE"):
    try:
        from . import _core as compiled  # type: ignore[attr-defined]
    except ImportError:
        compiled = None

active = compiled if compiled is not None else pure
BACKEND = "compiled" if compiled is not None else "pure"


def backend_by_name(name):
    if name in (None, "auto"):
        return active
    if name == "pure":
        return pure
    if name == "compiled":
        if compiled is None:
            raise RuntimeError("compiled kernel extension is not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
