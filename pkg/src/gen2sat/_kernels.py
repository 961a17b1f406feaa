"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise, or when
``GEN2SAT_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
pure-Python ``_pycore`` is used. Both produce identical results.
"""

import os

from . import _pycore

_force_py = os.environ.get("GEN2SAT_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _pycore
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pycore

BACKEND = "python" if _impl is _pycore else "cython"

scc = _impl.scc
explore = _impl.explore
traverse = _impl.traverse
inv_binomial = _impl.inv_binomial
inv_table = _impl.inv_table

POS, NEG = _pycore.POS, _pycore.NEG
PREFER_POSITIVE, PREFER_NEGATIVE = _pycore.PREFER_POSITIVE, _pycore.PREFER_NEGATIVE
